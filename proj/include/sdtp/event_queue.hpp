#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <utility>
#include <vector>

#include "sdtp/core.hpp"

namespace sdtp {

enum class EventKind : std::uint8_t {
  LinkDeliver,
  TimerFire,
  HostSend,
  ControlDeliver,
};

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::LinkDeliver: return "link_deliver";
    case EventKind::TimerFire: return "timer_fire";
    case EventKind::HostSend: return "host_send";
    case EventKind::ControlDeliver: return "control_deliver";
  }
  return "?";
}

// Deterministic event queue: (time, class, insertion seq) ordering with
// insertion seq strictly increasing. Deliveries run before timers at the same
// instant: a timer due exactly when a packet arrives observes the arrival.
class EventQueue {
 public:
  struct Event {
    SimTime at;
    std::uint64_t seq;
    EventKind kind;
    std::function<void()> fn;
  };

  void schedule(SimTime at, EventKind kind, std::function<void()> fn) {
    heap_.push(Item{at, next_seq_++, kind, std::move(fn)});
  }

  bool empty() const { return heap_.empty(); }
  size_t size() const { return heap_.size(); }
  SimTime next_time() const { return heap_.top().at; }

  Event pop() {
    Item it = heap_.top();
    heap_.pop();
    return Event{it.at, it.seq, it.kind, std::move(it.fn)};
  }

 private:
  struct Item {
    SimTime at;
    std::uint64_t seq;
    EventKind kind;
    std::function<void()> fn;

    int klass() const { return kind == EventKind::TimerFire ? 1 : 0; }

    bool operator>(const Item& o) const {
      if (at != o.at) return at > o.at;
      if (klass() != o.klass()) return klass() > o.klass();
      return seq > o.seq;
    }
  };

  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace sdtp
