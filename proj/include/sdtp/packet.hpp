#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdtp/core.hpp"

namespace sdtp {

// Packet types carried in the Flag field.
enum class PacketKind : std::uint8_t {
  Data = 1,
  Syn = 2,
  SynAck = 3,
  Rr = 4,  // retransmission request
  Rd = 5,  // retransmission data
  Ri = 6,  // retransmission information (disorder-length propagation)
  Cn = 7,  // caching notification (cache release)
};

// How a retransmission request was triggered. Only RR/RD packets carry one.
enum class RrTrigger : std::uint8_t {
  None = 0,
  Counter = 1,         // interarrival counter threshold exceeded (C)
  ArrivalTimeout = 2,  // interarrival timeout (T)
  RetransTimeout = 3,  // retransmission timeout (R)
};

inline const char* kind_name(PacketKind k) {
  switch (k) {
    case PacketKind::Data: return "DATA";
    case PacketKind::Syn: return "SYN";
    case PacketKind::SynAck: return "SYN-ACK";
    case PacketKind::Rr: return "RR";
    case PacketKind::Rd: return "RD";
    case PacketKind::Ri: return "RI";
    case PacketKind::Cn: return "CN";
  }
  return "?";
}

inline const char* trigger_name(RrTrigger t) {
  switch (t) {
    case RrTrigger::None: return "-";
    case RrTrigger::Counter: return "C";
    case RrTrigger::ArrivalTimeout: return "T";
    case RrTrigger::RetransTimeout: return "R";
  }
  return "?";
}

// 20-byte optional block. Field use by packet type:
//   RR/RD: num/start_seq/end_seq/start_num locate the request; aux echoes the
//          request's send timestamp.
//   RI:    aux carries AddL (additional disorder length).
//   CN:    aux carries the cumulative release sequence.
struct OptionalBlock {
  std::uint32_t num = 0;
  SeqNo start_seq = 0;
  SeqNo end_seq = 0;  // kSeqInfinity = open-ended
  std::uint32_t start_num = 0;
  std::uint32_t aux = 0;

  bool operator==(const OptionalBlock&) const = default;
};

// Logical header. The wire checksum is computed on encode and verified on
// decode; it is not part of the logical value.
struct SdtpHeader {
  std::uint32_t slice_id = 0;
  std::uint32_t conn_id = 0;
  SeqNo seq = 0;
  PacketKind kind = PacketKind::Data;
  RrTrigger trigger = RrTrigger::None;
  std::uint16_t payload_len = 0;
  std::uint32_t timestamp = 0;  // simulation microseconds, truncated
  std::optional<OptionalBlock> optional;

  bool operator==(const SdtpHeader&) const = default;
};

struct SdtpPacket {
  SdtpHeader header;
  std::vector<std::uint8_t> payload;

  bool operator==(const SdtpPacket&) const = default;
};

inline constexpr size_t kRequiredHeaderBytes = 24;
inline constexpr size_t kOptionalBlockBytes = 20;

// Control kinds always carry the optional block; SYN/SYN-ACK never do. A
// plain DATA packet carries none.
inline bool kind_has_optional(PacketKind k) {
  return k == PacketKind::Rr || k == PacketKind::Rd || k == PacketKind::Ri ||
         k == PacketKind::Cn;
}

inline bool kind_has_trigger(PacketKind k) {
  return k == PacketKind::Rr || k == PacketKind::Rd;
}

enum class CodecErrc {
  InvalidHeader,
  Truncated,
  BadChecksum,
  UnknownFlag,
  BadLength,
};

class CodecError : public std::runtime_error {
 public:
  CodecError(CodecErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  CodecErrc code() const { return code_; }

 private:
  CodecErrc code_;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, size_t off, std::uint16_t v) {
  b[off] = static_cast<std::uint8_t>(v >> 8);
  b[off + 1] = static_cast<std::uint8_t>(v & 0xff);
}

inline void put_u32(std::vector<std::uint8_t>& b, size_t off, std::uint32_t v) {
  b[off] = static_cast<std::uint8_t>(v >> 24);
  b[off + 1] = static_cast<std::uint8_t>((v >> 16) & 0xff);
  b[off + 2] = static_cast<std::uint8_t>((v >> 8) & 0xff);
  b[off + 3] = static_cast<std::uint8_t>(v & 0xff);
}

inline std::uint16_t get_u16(std::span<const std::uint8_t> b, size_t off) {
  return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> b, size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) |
         (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) |
         static_cast<std::uint32_t>(b[off + 3]);
}

}  // namespace detail

// 16-bit one's-complement sum (IP style) over the buffer, padding an odd
// trailing byte with zero.
inline std::uint16_t ones_complement_sum(std::span<const std::uint8_t> bytes) {
  std::uint32_t sum = 0;
  size_t i = 0;
  for (; i + 1 < bytes.size(); i += 2) {
    sum += (static_cast<std::uint32_t>(bytes[i]) << 8) | bytes[i + 1];
  }
  if (i < bytes.size()) {
    sum += static_cast<std::uint32_t>(bytes[i]) << 8;
  }
  while (sum >> 16) {
    sum = (sum & 0xffff) + (sum >> 16);
  }
  return static_cast<std::uint16_t>(sum);
}

inline void validate_header(const SdtpHeader& h, size_t payload_size) {
  if (h.payload_len != payload_size)
    throw CodecError(CodecErrc::InvalidHeader, "payload_len does not match payload");
  if (kind_has_trigger(h.kind) != (h.trigger != RrTrigger::None))
    throw CodecError(CodecErrc::InvalidHeader,
                     "trigger present iff kind is RR or RD");
  if (kind_has_optional(h.kind) != h.optional.has_value())
    throw CodecError(CodecErrc::InvalidHeader,
                     "optional block present iff kind is RR/RD/RI/CN");
  if (h.optional && h.optional->end_seq != kSeqInfinity &&
      h.optional->start_seq > h.optional->end_seq)
    throw CodecError(CodecErrc::InvalidHeader, "start_seq > end_seq");
}

// Wire layout, big-endian (offsets in bytes):
//   0  flag        (upper 5 bits: kind, lower 3 bits: trigger)
//   1  reserved
//   2  payload_len (2)
//   4  slice_id    (4)
//   8  conn_id     (4)
//   12 seq         (4)
//   16 timestamp   (4)
//   20 checksum    (2)   one's-complement sum over the whole packet,
//   22 reserved    (2)   computed with this field zeroed
//   24 optional    (20, RR/RD/RI/CN only): num, start_seq, end_seq,
//                  start_num, aux (4 bytes each)
//   then payload
inline std::vector<std::uint8_t> encode(const SdtpHeader& h,
                                        std::span<const std::uint8_t> payload) {
  validate_header(h, payload.size());
  size_t total = kRequiredHeaderBytes +
                 (h.optional ? kOptionalBlockBytes : 0) + payload.size();
  std::vector<std::uint8_t> out(total, 0);
  out[0] = static_cast<std::uint8_t>(
      (static_cast<unsigned>(h.kind) << 3) | static_cast<unsigned>(h.trigger));
  detail::put_u16(out, 2, h.payload_len);
  detail::put_u32(out, 4, h.slice_id);
  detail::put_u32(out, 8, h.conn_id);
  detail::put_u32(out, 12, h.seq);
  detail::put_u32(out, 16, h.timestamp);
  size_t off = kRequiredHeaderBytes;
  if (h.optional) {
    detail::put_u32(out, off + 0, h.optional->num);
    detail::put_u32(out, off + 4, h.optional->start_seq);
    detail::put_u32(out, off + 8, h.optional->end_seq);
    detail::put_u32(out, off + 12, h.optional->start_num);
    detail::put_u32(out, off + 16, h.optional->aux);
    off += kOptionalBlockBytes;
  }
  std::copy(payload.begin(), payload.end(), out.begin() + off);
  std::uint16_t csum = static_cast<std::uint16_t>(~ones_complement_sum(out));
  detail::put_u16(out, 20, csum);
  return out;
}

inline std::vector<std::uint8_t> encode(const SdtpPacket& p) {
  return encode(p.header, p.payload);
}

inline SdtpPacket decode(std::span<const std::uint8_t> buf) {
  if (buf.size() < kRequiredHeaderBytes)
    throw CodecError(CodecErrc::Truncated, "buffer shorter than required header");

  unsigned kind_bits = buf[0] >> 3;
  unsigned trig_bits = buf[0] & 0x7;
  if (kind_bits < 1 || kind_bits > 7)
    throw CodecError(CodecErrc::UnknownFlag, "unknown packet kind");
  auto kind = static_cast<PacketKind>(kind_bits);
  if (trig_bits > 3)
    throw CodecError(CodecErrc::UnknownFlag, "unknown trigger bits");
  auto trigger = static_cast<RrTrigger>(trig_bits);
  if (kind_has_trigger(kind) != (trigger != RrTrigger::None))
    throw CodecError(CodecErrc::UnknownFlag, "trigger/kind mismatch");

  SdtpHeader h;
  h.kind = kind;
  h.trigger = trigger;
  h.payload_len = detail::get_u16(buf, 2);
  h.slice_id = detail::get_u32(buf, 4);
  h.conn_id = detail::get_u32(buf, 8);
  h.seq = detail::get_u32(buf, 12);
  h.timestamp = detail::get_u32(buf, 16);

  size_t declared = kRequiredHeaderBytes +
                    (kind_has_optional(kind) ? kOptionalBlockBytes : 0) +
                    h.payload_len;
  if (buf.size() < declared)
    throw CodecError(CodecErrc::Truncated, "buffer shorter than declared length");
  if (buf.size() > declared)
    throw CodecError(CodecErrc::BadLength, "buffer longer than declared length");

  std::vector<std::uint8_t> scratch(buf.begin(), buf.end());
  std::uint16_t wire_csum = detail::get_u16(buf, 20);
  scratch[20] = scratch[21] = 0;
  std::uint16_t expect = static_cast<std::uint16_t>(~ones_complement_sum(scratch));
  if (wire_csum != expect)
    throw CodecError(CodecErrc::BadChecksum, "checksum mismatch");

  size_t off = kRequiredHeaderBytes;
  if (kind_has_optional(kind)) {
    OptionalBlock ob;
    ob.num = detail::get_u32(buf, off + 0);
    ob.start_seq = detail::get_u32(buf, off + 4);
    ob.end_seq = detail::get_u32(buf, off + 8);
    ob.start_num = detail::get_u32(buf, off + 12);
    ob.aux = detail::get_u32(buf, off + 16);
    if (ob.end_seq != kSeqInfinity && ob.start_seq > ob.end_seq)
      throw CodecError(CodecErrc::InvalidHeader, "start_seq > end_seq");
    h.optional = ob;
    off += kOptionalBlockBytes;
  }

  SdtpPacket pkt;
  pkt.header = h;
  pkt.payload.assign(buf.begin() + off, buf.begin() + off + h.payload_len);
  return pkt;
}

}  // namespace sdtp
