#include "pf/core.hpp"

namespace pf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::UnsupportedActivation: return "unsupported activation";
    case ErrorKind::NonFiniteLoss: return "non-finite loss";
    case ErrorKind::DegenerateInput: return "degenerate input";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Instability: return "instability";
    case ErrorKind::UnderResolved: return "under-resolved";
    case ErrorKind::NumericalFailure: return "numerical failure";
    case ErrorKind::CorruptDump: return "corrupt dump";
    case ErrorKind::GridMismatch: return "grid mismatch";
  }
  return "unknown";
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

}  // namespace pf
