#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace hopf {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Machine-readable error categories shared by every engine.
enum class ErrorKind {
  GaplessPoint,
  DegenerateEta,
  PoleSingular,
  IndexOutOfRange,
  EmptyInput,
  OrthogonalNeighbors,
  NonzeroNetFlux,
  ResolutionTooCoarse,
  ChartExhausted,
  CurvesTooClose,
  NotClosed,
  NonConvergence,
  PreconditionViolation,
  UsageError,
  IoError,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::GaplessPoint: return "GaplessPoint";
    case ErrorKind::DegenerateEta: return "DegenerateEta";
    case ErrorKind::PoleSingular: return "PoleSingular";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::OrthogonalNeighbors: return "OrthogonalNeighbors";
    case ErrorKind::NonzeroNetFlux: return "NonzeroNetFlux";
    case ErrorKind::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorKind::ChartExhausted: return "ChartExhausted";
    case ErrorKind::CurvesTooClose: return "CurvesTooClose";
    case ErrorKind::NotClosed: return "NotClosed";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::UsageError: return "UsageError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::PreconditionViolation, what);
}

/// Resolves a `--threads` style request (0 = hardware concurrency).
inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs body(begin, end) over fixed-size blocks of [0, count). Block
/// boundaries depend only on count and block, never on the worker count,
/// so per-block reductions combined in block order are deterministic.
template <class Body>
void parallel_blocks(std::size_t count, std::size_t block, unsigned threads, Body&& body) {
  if (count == 0) return;
  block = std::max<std::size_t>(block, 1);
  const std::size_t blocks = (count + block - 1) / block;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), blocks));
  auto run_block = [&](std::size_t b) {
    const std::size_t lo = b * block;
    body(b, lo, std::min(count, lo + block));
  };
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    return;
  }
  // The error from the lowest failing block wins, independent of timing.
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::size_t> error_block(workers, blocks);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += workers) {
          try {
            run_block(b);
          } catch (...) {
            errors[w] = std::current_exception();
            error_block[w] = b;
            return;
          }
        }
      });
    }
  }
  std::size_t first = blocks;
  std::exception_ptr chosen;
  for (unsigned w = 0; w < workers; ++w) {
    if (errors[w] && error_block[w] < first) {
      first = error_block[w];
      chosen = errors[w];
    }
  }
  if (chosen) std::rethrow_exception(chosen);
}

/// Per-index loop on top of parallel_blocks; body writes to disjoint slots.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  parallel_blocks(count, 256, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) body(i);
  });
}

}  // namespace hopf
