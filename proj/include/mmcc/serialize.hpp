#pragma once

#include "mmcc/nn.hpp"

#include <iosfwd>
#include <string>

namespace mmcc::nn {

// Network snapshot, bit-exact round trip:
//   magic "MMCC" | version u32 | layer count u32 |
//   per layer: rows u32 | cols u32 | weights f64 row-major | biases f64 | activation u8
// All integers little-endian.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void save_network(std::ostream& os, const Mlp& net);
Mlp load_network(std::istream& is);

} // namespace mmcc::nn
