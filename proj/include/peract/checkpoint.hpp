#pragma once

// Checkpoint layout (little-endian):
//   u32 magic "PACK", u32 version
//   u32 n, n x (string key, string value)          policy config
//   u32 n, n x (string name, u32 rows, u32 cols, f32[rows*cols])
//   u8 has_optimizer
//     i64 step, u32 n, n x (m tensor, v tensor)    same order as the parameters
//   i64 iteration, string rng_state
//   u32 n, n x (string key, string value)          free-form metadata
// Strings are u32 length + bytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peract/binary_io.hpp"
#include "peract/errors.hpp"
#include "peract/optimizer.hpp"
#include "peract/policy.hpp"
#include "peract/policy_config.hpp"

namespace peract {

inline constexpr std::uint32_t kCheckpointMagic = 0x4b434150;  // "PACK"
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<nn::Mat<float>> m;
  std::vector<nn::Mat<float>> v;
};

struct Checkpoint {
  PolicyConfig config;
  std::vector<std::pair<std::string, nn::Mat<float>>> params;
  std::optional<OptimizerState> optimizer;
  std::int64_t iteration = 0;
  std::string rng_state;
  KeyValues meta;
};

namespace detail {

inline void put_kv(io::Writer& w, const KeyValues& kv) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kv.size()));
  for (const auto& [k, v] : kv) {
    w.put_string(k);
    w.put_string(v);
  }
}

inline KeyValues get_kv(io::Reader& r) {
  KeyValues kv;
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto k = r.get_string();
    kv[k] = r.get_string();
  }
  return kv;
}

inline void put_tensor(io::Writer& w, const nn::Mat<float>& m) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
  w.put_array(m.data(), static_cast<std::size_t>(m.size()));
}

inline nn::Mat<float> get_tensor(io::Reader& r) {
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  if (std::uint64_t{rows} * cols * sizeof(float) > r.remaining()) throw CorruptData("checkpoint: truncated tensor");
  nn::Mat<float> m(rows, cols);
  r.get_array(m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  io::Writer w;
  w.put(kCheckpointMagic);
  w.put(kCheckpointVersion);
  detail::put_kv(w, ck.config.to_map());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& [name, value] : ck.params) {
    w.put_string(name);
    detail::put_tensor(w, value);
  }
  w.put<std::uint8_t>(ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    w.put(ck.optimizer->step);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.optimizer->m.size()));
    for (std::size_t i = 0; i < ck.optimizer->m.size(); ++i) {
      detail::put_tensor(w, ck.optimizer->m[i]);
      detail::put_tensor(w, ck.optimizer->v[i]);
    }
  }
  w.put(ck.iteration);
  w.put_string(ck.rng_state);
  detail::put_kv(w, ck.meta);
  // Write then rename so an interrupted save never leaves a torn file behind.
  const auto tmp = path.string() + ".tmp";
  w.save(tmp);
  std::filesystem::rename(tmp, path);
}

[[nodiscard]] inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  auto r = io::Reader::from_file(path.string());
  if (r.remaining() < 8 || r.get<std::uint32_t>() != kCheckpointMagic) {
    throw CorruptData("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IncompatibleVersion("checkpoint '" + path.string() + "' has version " + std::to_string(version) +
                              ", this build reads version " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  const auto unknown = ck.config.apply(detail::get_kv(r));
  if (!unknown.empty()) throw CorruptData("checkpoint: unknown config key '" + unknown.front() + "'");
  const auto np = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < np; ++i) {
    auto name = r.get_string();
    ck.params.emplace_back(std::move(name), detail::get_tensor(r));
  }
  if (r.get<std::uint8_t>()) {
    OptimizerState s;
    s.step = r.get<std::int64_t>();
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      s.m.push_back(detail::get_tensor(r));
      s.v.push_back(detail::get_tensor(r));
    }
    ck.optimizer = std::move(s);
  }
  ck.iteration = r.get<std::int64_t>();
  ck.rng_state = r.get_string();
  ck.meta = detail::get_kv(r);
  if (!r.at_end()) throw CorruptData("checkpoint: trailing bytes");
  return ck;
}

template <typename Scalar>
[[nodiscard]] Checkpoint make_checkpoint(const PerceiverPolicy<Scalar>& policy, const Optimizer<Scalar>* opt = nullptr) {
  Checkpoint ck;
  ck.config = policy.config();
  policy.visit_parameters([&](const std::string& name, const nn::Mat<Scalar>& v, const nn::Mat<Scalar>&) {
    ck.params.emplace_back(name, v.template cast<float>());
  });
  if (opt) {
    OptimizerState s;
    s.step = opt->step_count();
    for (const auto& m : opt->first_moments()) s.m.push_back(m.template cast<float>());
    for (const auto& v : opt->second_moments()) s.v.push_back(v.template cast<float>());
    ck.optimizer = std::move(s);
  }
  return ck;
}

/// Copies the stored parameters into `policy`; names, shapes and config must match.
template <typename Scalar>
void load_parameters(const Checkpoint& ck, PerceiverPolicy<Scalar>& policy) {
  if (!(ck.config == policy.config())) {
    throw InvalidInput("checkpoint was written for a different policy configuration");
  }
  std::size_t i = 0;
  policy.visit_parameters([&](const std::string& name, nn::Mat<Scalar>& v, nn::Mat<Scalar>&) {
    if (i >= ck.params.size() || ck.params[i].first != name) {
      throw CorruptData("checkpoint: parameter '" + name + "' missing or out of order");
    }
    const auto& stored = ck.params[i++].second;
    if (stored.rows() != v.rows() || stored.cols() != v.cols()) {
      throw CorruptData("checkpoint: shape mismatch for '" + name + "'");
    }
    v = stored.template cast<Scalar>();
  });
  if (i != ck.params.size()) throw CorruptData("checkpoint: unexpected extra parameters");
}

template <typename Scalar>
void load_optimizer(const Checkpoint& ck, Optimizer<Scalar>& opt) {
  if (!ck.optimizer) throw InvalidInput("checkpoint has no optimizer state");
  std::vector<nn::Mat<Scalar>> m, v;
  for (const auto& x : ck.optimizer->m) m.push_back(x.template cast<Scalar>());
  for (const auto& x : ck.optimizer->v) v.push_back(x.template cast<Scalar>());
  opt.restore(ck.optimizer->step, std::move(m), std::move(v));
}

[[nodiscard]] inline PerceiverPolicy<float> load_policy(const std::filesystem::path& path) {
  const auto ck = read_checkpoint(path);
  PerceiverPolicy<float> policy(ck.config);
  load_parameters(ck, policy);
  return policy;
}

}  // namespace peract
