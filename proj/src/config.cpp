#include "splatsdf/train/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace splatsdf::train {

void TrainConfig::validate() const {
  if (lambda1 < 0.f || lambda1 > 1.f)
    throw std::invalid_argument("config: lambda1 must be in [0,1]");
  if (pretrain_gs_iters < 0 || co_opt_iters < 0 || independent_warmup_iters < 0)
    throw std::invalid_argument("config: iteration counts must be >= 0");
  if (independent_warmup_iters > co_opt_iters)
    throw std::invalid_argument("config: warmup must not exceed co-opt iterations");
  if (rays_per_batch < 1) throw std::invalid_argument("config: rays_per_batch must be >= 1");
  if (samples_coarse < 2) throw std::invalid_argument("config: samples_coarse must be >= 2");
  if (gamma_range <= 0) throw std::invalid_argument("config: gamma_range must be > 0");
  thresholds.validate();
}

namespace {

struct Field {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <class T>
T parse_value(const std::string& s);

template <>
float parse_value<float>(const std::string& s) {
  size_t pos = 0;
  const float v = std::stof(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing junk");
  return v;
}
template <>
int parse_value<int>(const std::string& s) {
  size_t pos = 0;
  const int v = std::stoi(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing junk");
  return v;
}
template <>
std::int64_t parse_value<std::int64_t>(const std::string& s) {
  size_t pos = 0;
  const std::int64_t v = std::stoll(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing junk");
  return v;
}
template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& s) {
  size_t pos = 0;
  const std::uint64_t v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing junk");
  return v;
}
template <>
bool parse_value<bool>(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true/false");
}

template <class T>
std::string format_value(T v) {
  std::ostringstream os;
  if constexpr (std::is_same_v<T, bool>)
    os << (v ? "true" : "false");
  else if constexpr (std::is_floating_point_v<T>)
    os << std::setprecision(9) << v;
  else
    os << v;
  return os.str();
}

#define SCALAR_FIELD(name, member)                                            \
  {name,                                                                      \
   {[](const TrainConfig& c) { return format_value(c.member); },              \
    [](TrainConfig& c, const std::string& s) {                                \
      c.member = parse_value<std::decay_t<decltype(c.member)>>(s);            \
    }}}

const std::map<std::string, Field>& field_table() {
  static const std::map<std::string, Field> table = {
      SCALAR_FIELD("lambda1", lambda1),
      SCALAR_FIELD("lambda2", lambda2),
      SCALAR_FIELD("lambda_eik", lambda_eik),
      SCALAR_FIELD("delta_edge", delta_edge),
      SCALAR_FIELD("gamma_range", gamma_range),
      SCALAR_FIELD("guided_band_floor", guided_band_floor),
      SCALAR_FIELD("rays_per_batch", rays_per_batch),
      SCALAR_FIELD("samples_coarse", samples_coarse),
      SCALAR_FIELD("samples_fine", samples_fine),
      SCALAR_FIELD("eikonal_uniform_points", eikonal_uniform_points),
      SCALAR_FIELD("grid_resolution", grid_resolution),
      SCALAR_FIELD("tau_s", thresholds.tau_s),
      SCALAR_FIELD("tau_n", thresholds.tau_n),
      SCALAR_FIELD("k_neighbors", thresholds.k_neighbors),
      SCALAR_FIELD("tau_p", thresholds.tau_p),
      SCALAR_FIELD("tau_d", thresholds.tau_d),
      SCALAR_FIELD("lambda_sigma", thresholds.lambda_sigma),
      SCALAR_FIELD("tau_g", thresholds.tau_g),
      SCALAR_FIELD("pretrain_gs_iters", pretrain_gs_iters),
      SCALAR_FIELD("co_opt_iters", co_opt_iters),
      SCALAR_FIELD("independent_warmup_iters", independent_warmup_iters),
      SCALAR_FIELD("density_control_every", density_control_every),
      SCALAR_FIELD("global_densify_every", global_densify_every),
      SCALAR_FIELD("baseline_densify_every", baseline_densify_every),
      SCALAR_FIELD("baseline_densify_from", baseline_densify_from),
      SCALAR_FIELD("split_scale_threshold", split_scale_threshold),
      SCALAR_FIELD("min_opacity", min_opacity),
      SCALAR_FIELD("max_gaussians", max_gaussians),
      SCALAR_FIELD("lr_mean", lr_mean),
      SCALAR_FIELD("lr_mean_final_factor", lr_mean_final_factor),
      SCALAR_FIELD("lr_quat", lr_quat),
      SCALAR_FIELD("lr_scales", lr_scales),
      SCALAR_FIELD("lr_opacity", lr_opacity),
      SCALAR_FIELD("lr_color", lr_color),
      SCALAR_FIELD("lr_sdf", lr_sdf),
      SCALAR_FIELD("lr_sharpness", lr_sharpness),
      SCALAR_FIELD("sdf_pe_freqs", sdf_pe_freqs),
      SCALAR_FIELD("sdf_hidden", sdf_hidden),
      SCALAR_FIELD("sdf_feature_dim", sdf_feature_dim),
      SCALAR_FIELD("sdf_init_radius_factor", sdf_init_radius_factor),
      SCALAR_FIELD("sdf_inside_out", sdf_inside_out),
      SCALAR_FIELD("enable_mutual", enable_mutual),
      SCALAR_FIELD("enable_normal_prior", enable_normal_prior),
      SCALAR_FIELD("enable_edge_prior", enable_edge_prior),
      SCALAR_FIELD("edge_weighted_sdf_color", edge_weighted_sdf_color),
      SCALAR_FIELD("exp_transmittance", exp_transmittance),
      SCALAR_FIELD("normal_loss_camera_frame", normal_loss_camera_frame),
      SCALAR_FIELD("seed", seed),
      SCALAR_FIELD("threads", threads),
      SCALAR_FIELD("log_every", log_every),
      SCALAR_FIELD("checkpoint_every", checkpoint_every),
      SCALAR_FIELD("background_r", background[0]),
      SCALAR_FIELD("background_g", background[1]),
      SCALAR_FIELD("background_b", background[2]),
      SCALAR_FIELD("t_near", t_near),
  };
  return table;
}

#undef SCALAR_FIELD

}  // namespace

void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = field_table();
  auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  try {
    it->second.set(cfg, value);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config: bad value for '" + key + "': " + value);
  }
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      // blank or comment-only lines are fine
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::invalid_argument("config: malformed line " + std::to_string(lineno) + ": " +
                                    line);
      continue;
    }
    auto trim = [](std::string s) {
      const size_t b = s.find_first_not_of(" \t\r");
      const size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

void save_config(const std::string& path, const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  for (const auto& [key, field] : field_table()) out << key << " = " << field.get(cfg) << "\n";
}

}  // namespace splatsdf::train
