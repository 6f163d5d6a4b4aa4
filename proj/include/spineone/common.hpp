#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace spineone {

// Error conditions surfaced by the library. Codes are stable; messages are
// for humans.
enum class Err {
  IoError,
  BadMetadata,
  MissingSpacing,
  CorruptSlice,
  BadAnnotationCount,
  DuplicateStructure,
  BadArgument,
  TooSmall,
  OverlapViolation,
  ShapeMismatch,
  ConfigMismatch,
  EmptyDataset,
};

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] void fail(Err code, const std::string& what);

inline void require(bool ok, Err code, const std::string& what) {
  if (!ok) fail(code, what);
}

// SplitMix64 finalizer. Used to derive independent, reproducible RNG streams
// from (seed, salt, index) tuples so determinism never depends on call order.
inline uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }
inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) {
  return mix64(mix64(a, b) ^ mix64(c));
}

uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64(const std::string& s);
std::string to_hex(uint64_t v);

}  // namespace spineone
