#include "cosmos/wire.hpp"

#include <bit>
#include <cstdio>
#include <stdexcept>

namespace cosmos {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t off) {
  return static_cast<std::uint32_t>(bytes[off]) | (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
         (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
         (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_pseudo_labels(const PseudoLabelMatrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kWireHeaderBytes + m.data().size() * 4);
  out.push_back('C');
  out.push_back('P');
  out.push_back('L');
  out.push_back('M');
  put_u16(out, kWireVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

PseudoLabelMatrix decode_pseudo_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWireHeaderBytes)
    throw std::runtime_error("decode_pseudo_labels: short message");
  if (bytes[0] != 'C' || bytes[1] != 'P' || bytes[2] != 'L' || bytes[3] != 'M')
    throw std::runtime_error("decode_pseudo_labels: bad magic");
  const std::uint16_t version =
      static_cast<std::uint16_t>(bytes[4]) | (static_cast<std::uint16_t>(bytes[5]) << 8);
  if (version != kWireVersion) throw std::runtime_error("decode_pseudo_labels: unknown version");
  const std::uint32_t rows = get_u32(bytes, 6);
  const std::uint32_t cols = get_u32(bytes, 10);
  if (bytes.size() != kWireHeaderBytes + static_cast<std::size_t>(rows) * cols * 4)
    throw std::runtime_error("decode_pseudo_labels: payload size mismatch");
  PseudoLabelMatrix m(static_cast<int>(rows), static_cast<int>(cols));
  std::size_t off = kWireHeaderBytes;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c, off += 4)
      m.at(static_cast<int>(r), static_cast<int>(c)) =
          static_cast<double>(std::bit_cast<float>(get_u32(bytes, off)));
  return m;
}

std::uint64_t comm_payload_bytes(std::uint64_t pool_size, std::uint64_t num_classes,
                                 std::uint64_t precision_bytes) {
  if (pool_size < 1 || num_classes < 1)
    throw std::invalid_argument("comm_payload_bytes: pool size and classes must be >= 1");
  return pool_size * num_classes * precision_bytes;
}

std::uint64_t message_bytes(std::uint64_t pool_size, std::uint64_t num_classes) {
  return kWireHeaderBytes + comm_payload_bytes(pool_size, num_classes);
}

double bytes_to_mib(std::uint64_t bytes) {
  return static_cast<double>(bytes) / (1024.0 * 1024.0);
}

std::string format_mib(std::uint64_t bytes) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", bytes_to_mib(bytes));
  return buf;
}

}  // namespace cosmos
