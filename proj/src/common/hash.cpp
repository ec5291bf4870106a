#include "kft/common/hash.hpp"

#include <array>
#include <fstream>

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"

namespace kft {

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open file for hashing: " + path.string());
  uint64_t h = kFnvOffset;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(buf.data(), static_cast<size_t>(in.gcount()), h);
  }
  return h;
}

uint64_t derive_seed(uint64_t global_seed, std::string_view label) {
  uint64_t h = fnv1a64(label);
  Rng mixer(global_seed ^ h);
  return mixer.next_u64();
}

}  // namespace kft
