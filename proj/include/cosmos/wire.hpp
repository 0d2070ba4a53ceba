#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cosmos/pseudo_labels.hpp"

namespace cosmos {

// Pseudo-label message layout, all little-endian:
//   magic 'CPLM' | version u16 | rows u32 | cols u32 | rows*cols float32
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::size_t kWireHeaderBytes = 14;

std::vector<std::uint8_t> encode_pseudo_labels(const PseudoLabelMatrix& m);
PseudoLabelMatrix decode_pseudo_labels(std::span<const std::uint8_t> bytes);

// Payload bytes of one pseudo-label message (pool size x classes x
// precision), excluding the header.
std::uint64_t comm_payload_bytes(std::uint64_t pool_size, std::uint64_t num_classes,
                                 std::uint64_t precision_bytes = 4);

// Header plus payload; what the communication ledger charges per message.
std::uint64_t message_bytes(std::uint64_t pool_size, std::uint64_t num_classes);

double bytes_to_mib(std::uint64_t bytes);      // divisor 2^20
std::string format_mib(std::uint64_t bytes);   // two decimals

}  // namespace cosmos
