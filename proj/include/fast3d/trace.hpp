#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fast3d/config.hpp"
#include "fast3d/grid.hpp"
#include "fast3d/pipeline.hpp"

namespace fast3d {

inline constexpr char kTraceMagic[4] = {'F', '3', 'D', 'C'};
inline constexpr std::uint16_t kTraceVersion = 1;
/// magic(4) + version(2) + six u32 dims + flags(1).
inline constexpr std::size_t kTraceHeaderBytes = 31;
inline constexpr std::size_t kTraceFooterBytes = 8;
inline constexpr std::uint8_t kTraceFlagCfgPairs = 0x01;

/// FNV-1a 64-bit hash; the trace footer is this hash of header and body.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

struct TraceHeader {
  std::uint32_t steps = 0;
  GridDims dims{};
  bool has_cfg_pairs = false;

  std::uint64_t body_bytes() const;
  std::uint64_t file_bytes() const { return kTraceHeaderBytes + body_bytes() + kTraceFooterBytes; }
};

/// Runs full sampling from `noise` and stores every step's velocity tensors.
/// When any step is guided, both conditional and unconditional tensors are
/// stored for every step. The file is written to a temporary sibling and
/// renamed into place.
TraceHeader record_trace(const SamplerConfig& config, const VelocityOracle& oracle,
                         const LatentGrid& noise, const std::filesystem::path& path);

/// Serves velocities from a recorded trace. The whole file is validated on
/// load; the object is immutable afterwards and safe for concurrent replay.
class TraceReplayOracle final : public VelocityOracle {
 public:
  static TraceReplayOracle load(const std::filesystem::path& path);
  static TraceReplayOracle from_bytes(std::span<const std::uint8_t> bytes);

  void evaluate(const LatentGrid& state, const StepContext& ctx, bool conditional,
                std::span<const ActiveToken> active, std::span<float> out) const override;

  const TraceHeader& header() const { return header_; }
  /// Stored tensor for `step` in grid order.
  std::span<const float> tensor(int step, bool conditional) const;

 private:
  TraceHeader header_;
  std::vector<float> values_;
};

}  // namespace fast3d
