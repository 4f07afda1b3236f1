#include "fast3d/trace.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>

#include "fast3d/error.hpp"
#include "fast3d/schedule.hpp"

namespace fast3d {

static_assert(std::endian::native == std::endian::little,
              "trace serialization assumes a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& buf, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

std::vector<std::uint8_t> encode_header(const TraceHeader& h) {
  std::vector<std::uint8_t> buf(kTraceMagic, kTraceMagic + 4);
  put<std::uint16_t>(buf, kTraceVersion);
  put<std::uint32_t>(buf, h.steps);
  for (const auto d : {h.dims.batch, h.dims.channels, h.dims.depth, h.dims.height, h.dims.width}) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
  }
  put<std::uint8_t>(buf, h.has_cfg_pairs ? kTraceFlagCfgPairs : 0);
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (const auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t TraceHeader::body_bytes() const {
  return static_cast<std::uint64_t>(steps) * (has_cfg_pairs ? 2U : 1U) *
         static_cast<std::uint64_t>(dims.elements()) * sizeof(float);
}

TraceHeader record_trace(const SamplerConfig& config, const VelocityOracle& oracle,
                         const LatentGrid& noise, const std::filesystem::path& path) {
  const GridDims dims = noise.dims();
  dims.validate();
  const TimeSchedule schedule(config.total_steps, config.eta);
  TraceHeader header{static_cast<std::uint32_t>(config.total_steps), dims, false};
  for (int k = 1; k <= schedule.steps(); ++k) {
    header.has_cfg_pairs = header.has_cfg_pairs || step_is_guided(schedule, k, config.cfg_interval);
  }

  std::vector<ActiveToken> all;
  for (std::int64_t b = 0; b < dims.batch; ++b) {
    for (std::int64_t i = 0; i < dims.tokens(); ++i) all.push_back({b, i});
  }
  const auto channels = static_cast<std::size_t>(dims.channels);

  std::vector<std::uint8_t> buf = encode_header(header);
  buf.reserve(static_cast<std::size_t>(header.file_bytes()));

  LatentGrid state = noise;
  LatentGrid cond(dims), uncond(dims);
  std::vector<float> cv(all.size() * channels), uv(cv.size());
  auto scatter = [&](const std::vector<float>& src, LatentGrid& dst) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      for (std::size_t c = 0; c < channels; ++c) {
        dst.at(all[j].batch, static_cast<std::int64_t>(c), all[j].token) = src[j * channels + c];
      }
    }
  };
  auto append = [&](const LatentGrid& g) {
    const auto d = g.data();
    const auto* p = reinterpret_cast<const std::uint8_t*>(d.data());
    buf.insert(buf.end(), p, p + d.size_bytes());
  };

  for (int k = 1; k <= schedule.steps(); ++k) {
    const StepContext ctx{k, schedule.t(k), schedule.t_prev(k)};
    oracle.evaluate(state, ctx, true, all, cv);
    scatter(cv, cond);
    append(cond);
    if (header.has_cfg_pairs) {
      oracle.evaluate(state, ctx, false, all, uv);
      scatter(uv, uncond);
      append(uncond);
    }
    LatentGrid v = cond;
    if (step_is_guided(schedule, k, config.cfg_interval)) {
      const auto s = static_cast<float>(config.cfg_scale);
      auto vd = v.data();
      const auto ud = std::as_const(uncond).data();
      for (std::size_t i = 0; i < vd.size(); ++i) vd[i] = ud[i] + s * (vd[i] - ud[i]);
    }
    const auto dt = static_cast<float>(ctx.t - ctx.t_prev);
    auto x = state.data();
    const auto vv = std::as_const(v).data();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] - dt * vv[i];
  }
  put<std::uint64_t>(buf, fnv1a64(buf));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  return header;
}

TraceReplayOracle TraceReplayOracle::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

TraceReplayOracle TraceReplayOracle::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw TraceTruncated("trace shorter than its magic");
  if (std::memcmp(bytes.data(), kTraceMagic, 4) != 0) throw TraceBadMagic("trace magic is not F3DC");
  if (bytes.size() < 6) throw TraceTruncated("trace shorter than its version field");
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kTraceVersion) {
    throw TraceVersionMismatch("trace version " + std::to_string(version) + ", expected " +
                               std::to_string(kTraceVersion));
  }
  if (bytes.size() < kTraceHeaderBytes) throw TraceTruncated("trace header is incomplete");

  TraceHeader h;
  h.steps = get<std::uint32_t>(bytes, 6);
  std::int64_t dims[5];
  for (int i = 0; i < 5; ++i) dims[i] = get<std::uint32_t>(bytes, 10 + 4 * static_cast<std::size_t>(i));
  h.dims = GridDims{dims[0], dims[1], dims[2], dims[3], dims[4]};
  const auto flags = get<std::uint8_t>(bytes, 30);
  if (h.steps == 0 || !h.dims.valid()) throw TraceMalformed("trace header has a zero dimension");
  if ((flags & ~kTraceFlagCfgPairs) != 0) throw TraceMalformed("trace header has unknown flags");
  h.has_cfg_pairs = (flags & kTraceFlagCfgPairs) != 0;

  const auto expected = h.file_bytes();
  if (bytes.size() < expected) {
    throw TraceTruncated("trace has " + std::to_string(bytes.size()) + " bytes, expected " +
                         std::to_string(expected));
  }
  if (bytes.size() > expected) {
    throw TraceMalformed("trace has " + std::to_string(bytes.size() - expected) +
                         " trailing bytes");
  }
  const auto payload = bytes.first(static_cast<std::size_t>(expected) - kTraceFooterBytes);
  if (fnv1a64(payload) != get<std::uint64_t>(bytes, payload.size())) {
    throw TraceChecksumMismatch("trace checksum does not match its contents");
  }

  TraceReplayOracle oracle;
  oracle.header_ = h;
  oracle.values_.resize(static_cast<std::size_t>(h.body_bytes() / sizeof(float)));
  std::memcpy(oracle.values_.data(), bytes.data() + kTraceHeaderBytes,
              static_cast<std::size_t>(h.body_bytes()));
  return oracle;
}

std::span<const float> TraceReplayOracle::tensor(int step, bool conditional) const {
  if (step < 1 || static_cast<std::uint32_t>(step) > header_.steps) {
    throw OracleError("trace holds steps 1.." + std::to_string(header_.steps) + ", requested " +
                      std::to_string(step));
  }
  if (!conditional && !header_.has_cfg_pairs) {
    throw OracleError("trace has no unconditional tensors");
  }
  const auto n = static_cast<std::size_t>(header_.dims.elements());
  const std::size_t per_step = header_.has_cfg_pairs ? 2 : 1;
  const std::size_t index = static_cast<std::size_t>(step - 1) * per_step + (conditional ? 0 : 1);
  return std::span<const float>(values_).subspan(index * n, n);
}

void TraceReplayOracle::evaluate(const LatentGrid& state, const StepContext& ctx, bool conditional,
                                 std::span<const ActiveToken> active, std::span<float> out) const {
  const auto& g = header_.dims;
  if (state.dims() != g) throw ShapeMismatch("state shape differs from the trace");
  const auto channels = static_cast<std::size_t>(g.channels);
  if (out.size() != active.size() * channels) {
    throw ShapeMismatch("output buffer must hold active.size() * channels values");
  }
  const auto values = tensor(ctx.step, conditional);
  const auto np = g.tokens();
  for (std::size_t j = 0; j < active.size(); ++j) {
    const auto [b, i] = active[j];
    if (b < 0 || b >= g.batch || i < 0 || i >= np) throw OracleError("active token out of range");
    for (std::int64_t c = 0; c < g.channels; ++c) {
      out[j * channels + static_cast<std::size_t>(c)] =
          values[static_cast<std::size_t>((b * g.channels + c) * np + i)];
    }
  }
}

}  // namespace fast3d
