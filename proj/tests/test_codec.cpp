#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdtp/packet.hpp"

using namespace sdtp;

namespace {

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::string strip_ws(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

std::vector<std::uint8_t> from_hex(const std::string& raw) {
  std::string hex = strip_ws(raw);
  std::vector<std::uint8_t> out;
  for (size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(
        std::stoul(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

SdtpHeader random_header(std::mt19937_64& rng, std::uint16_t payload_len) {
  SdtpHeader h;
  static const PacketKind kinds[] = {PacketKind::Data, PacketKind::Syn,
                                     PacketKind::SynAck, PacketKind::Rr,
                                     PacketKind::Rd,     PacketKind::Ri,
                                     PacketKind::Cn};
  h.kind = kinds[rng() % 7];
  if (kind_has_trigger(h.kind)) {
    static const RrTrigger trigs[] = {RrTrigger::Counter,
                                      RrTrigger::ArrivalTimeout,
                                      RrTrigger::RetransTimeout};
    h.trigger = trigs[rng() % 3];
  }
  h.slice_id = static_cast<std::uint32_t>(rng());
  h.conn_id = static_cast<std::uint32_t>(rng());
  h.seq = static_cast<std::uint32_t>(rng());
  h.timestamp = static_cast<std::uint32_t>(rng());
  h.payload_len = payload_len;
  if (kind_has_optional(h.kind)) {
    OptionalBlock ob;
    ob.num = static_cast<std::uint32_t>(rng());
    ob.start_seq = static_cast<std::uint32_t>(rng() % 100000);
    if (h.kind == PacketKind::Rr && h.trigger == RrTrigger::ArrivalTimeout) {
      ob.end_seq = kSeqInfinity;
    } else {
      ob.end_seq = ob.start_seq + static_cast<std::uint32_t>(rng() % 1000);
    }
    ob.start_num = static_cast<std::uint32_t>(rng() % 16);
    ob.aux = static_cast<std::uint32_t>(rng());
    h.optional = ob;
  }
  return h;
}

}  // namespace

TEST_CASE("minimal DATA header encodes to exactly 24 bytes") {
  SdtpHeader h;
  h.kind = PacketKind::Data;
  auto bytes = encode(h, {});
  REQUIRE(bytes.size() == 24);
  // Hand-computed: flag byte 0x08, all other fields zero, so the checksum is
  // ~0x0800 = 0xf7ff at offset 20.
  REQUIRE(bytes[0] == 0x08);
  REQUIRE(bytes[20] == 0xf7);
  REQUIRE(bytes[21] == 0xff);
}

TEST_CASE("RR with optional block encodes to 44 bytes") {
  SdtpHeader h;
  h.kind = PacketKind::Rr;
  h.trigger = RrTrigger::Counter;
  h.optional = OptionalBlock{1, 3, 5, 0, 42};
  auto bytes = encode(h, {});
  REQUIRE(bytes.size() == 44);
  auto pkt = decode(bytes);
  REQUIRE(pkt.header == h);
}

TEST_CASE("encoded length is 24 + 20*has_optional + payload_len") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    auto len = static_cast<std::uint16_t>(rng() % 1200);
    auto h = random_header(rng, len);
    std::vector<std::uint8_t> payload(len);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    auto bytes = encode(h, payload);
    REQUIRE(bytes.size() == 24 + (h.optional ? 20 : 0) + payload.size());
  }
}

TEST_CASE("round-trip identity over 10^4 random packets") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 10000; ++i) {
    auto len = static_cast<std::uint16_t>(rng() % 64);
    auto h = random_header(rng, len);
    std::vector<std::uint8_t> payload(len);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    auto bytes = encode(h, payload);
    auto pkt = decode(bytes);
    REQUIRE(pkt.header == h);
    REQUIRE(pkt.payload == payload);
  }
}

TEST_CASE("truncated buffers are rejected") {
  SdtpHeader h;
  h.kind = PacketKind::Data;
  auto bytes = encode(h, {});
  bytes.resize(23);
  try {
    decode(bytes);
    FAIL("expected Truncated");
  } catch (const CodecError& e) {
    REQUIRE(e.code() == CodecErrc::Truncated);
  }

  SdtpHeader h2;
  h2.kind = PacketKind::Data;
  h2.payload_len = 10;
  std::vector<std::uint8_t> payload(10, 0xaa);
  auto full = encode(h2, payload);
  full.resize(full.size() - 3);
  try {
    decode(full);
    FAIL("expected Truncated");
  } catch (const CodecError& e) {
    REQUIRE(e.code() == CodecErrc::Truncated);
  }
}

TEST_CASE("any single-bit corruption is detected") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 2000; ++i) {
    auto len = static_cast<std::uint16_t>(1 + rng() % 40);
    auto h = random_header(rng, len);
    std::vector<std::uint8_t> payload(len);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    auto bytes = encode(h, payload);
    size_t bit = rng() % (bytes.size() * 8);
    bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    REQUIRE_THROWS_AS(decode(bytes), CodecError);
  }
}

TEST_CASE("invalid headers are rejected at encode time") {
  SdtpHeader h;
  h.kind = PacketKind::Data;
  h.trigger = RrTrigger::Counter;  // trigger without RR/RD
  REQUIRE_THROWS_AS(encode(h, {}), CodecError);

  SdtpHeader h2;
  h2.kind = PacketKind::Rr;  // RR without trigger/optional
  REQUIRE_THROWS_AS(encode(h2, {}), CodecError);

  SdtpHeader h3;
  h3.kind = PacketKind::Cn;
  h3.optional = OptionalBlock{0, 10, 4, 0, 0};  // start > end
  REQUIRE_THROWS_AS(encode(h3, {}), CodecError);

  SdtpHeader h4;
  h4.kind = PacketKind::Data;
  h4.payload_len = 3;  // does not match payload
  REQUIRE_THROWS_AS(encode(h4, {}), CodecError);
}

TEST_CASE("golden wire vectors stay byte-exact") {
  std::ifstream f(std::string(SDTP_SOURCE_DIR) + "/tests/golden/packet_vectors.txt");
  REQUIRE(f.good());
  std::string line;
  int checked = 0;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto bar = line.find('|');
    REQUIRE(bar != std::string::npos);
    std::string hex = strip_ws(line.substr(bar + 1));
    auto bytes = from_hex(hex);
    auto pkt = decode(bytes);
    auto re = encode(pkt);
    REQUIRE(to_hex(re) == hex);
    ++checked;
  }
  REQUIRE(checked >= 4);
}

TEST_CASE("golden vector fields decode to the documented values") {
  // data_seq7: DATA, slice 1, conn 2, seq 7, ts 1500, payload "hi"
  std::ifstream f(std::string(SDTP_SOURCE_DIR) + "/tests/golden/packet_vectors.txt");
  std::string line;
  bool found = false;
  while (std::getline(f, line)) {
    if (line.rfind("data_seq7", 0) != 0) continue;
    found = true;
    auto bytes = from_hex(line.substr(line.find('|') + 1));
    auto pkt = decode(bytes);
    REQUIRE(pkt.header.kind == PacketKind::Data);
    REQUIRE(pkt.header.slice_id == 1);
    REQUIRE(pkt.header.conn_id == 2);
    REQUIRE(pkt.header.seq == 7);
    REQUIRE(pkt.header.timestamp == 1500);
    REQUIRE(pkt.payload == std::vector<std::uint8_t>{'h', 'i'});
  }
  REQUIRE(found);
}
