#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "splatsdf/sdf/mlp.hpp"

namespace splatsdf::sdf {

namespace {

constexpr std::uint32_t kMagic = 0x53444642;  // "SDFB"
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::FILE* f, std::uint32_t v) { std::fwrite(&v, 4, 1, f); }
void put_f32(std::FILE* f, float v) { std::fwrite(&v, 4, 1, f); }
std::uint32_t get_u32(std::FILE* f) {
  std::uint32_t v = 0;
  if (std::fread(&v, 4, 1, f) != 1) throw std::runtime_error("sdf checkpoint: truncated");
  return v;
}
float get_f32(std::FILE* f) {
  float v = 0;
  if (std::fread(&v, 4, 1, f) != 1) throw std::runtime_error("sdf checkpoint: truncated");
  return v;
}

void put_mat(std::FILE* f, const MatX<float>& m) {
  put_u32(f, std::uint32_t(m.rows()));
  put_u32(f, std::uint32_t(m.cols()));
  std::fwrite(m.data(), 4, size_t(m.size()), f);
}

MatX<float> get_mat(std::FILE* f) {
  const std::uint32_t r = get_u32(f), c = get_u32(f);
  MatX<float> m(r, c);
  if (std::fread(m.data(), 4, size_t(m.size()), f) != size_t(m.size()))
    throw std::runtime_error("sdf checkpoint: truncated matrix");
  return m;
}

}  // namespace

void save_mlp(const std::string& path, const SdfMlp<float>& mlp) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("sdf checkpoint: cannot write " + path);
  put_u32(f.get(), kMagic);
  put_u32(f.get(), kVersion);
  put_u32(f.get(), std::uint32_t(mlp.cfg.pe_freqs));
  put_u32(f.get(), std::uint32_t(mlp.cfg.geo_hidden));
  put_u32(f.get(), std::uint32_t(mlp.cfg.geo_layers));
  put_u32(f.get(), std::uint32_t(mlp.cfg.skip_at));
  put_u32(f.get(), std::uint32_t(mlp.cfg.feature_dim));
  put_u32(f.get(), std::uint32_t(mlp.cfg.color_hidden));
  put_u32(f.get(), std::uint32_t(mlp.cfg.color_layers));
  put_f32(f.get(), mlp.cfg.softplus_beta);
  put_f32(f.get(), mlp.log_s);
  for (int a = 0; a < 3; ++a) put_f32(f.get(), mlp.norm_center[a]);
  put_f32(f.get(), mlp.norm_scale);
  for (int a = 0; a < 3; ++a) put_f32(f.get(), mlp.domain_lo[a]);
  for (int a = 0; a < 3; ++a) put_f32(f.get(), mlp.domain_hi[a]);
  mlp.for_each_param([&](const MatX<float>& m) { put_mat(f.get(), m); });
}

SdfMlp<float> load_mlp(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("sdf checkpoint: cannot open " + path);
  if (get_u32(f.get()) != kMagic) throw std::runtime_error("sdf checkpoint: bad magic in " + path);
  if (get_u32(f.get()) != kVersion)
    throw std::runtime_error("sdf checkpoint: unsupported version in " + path);
  SdfMlp<float> mlp;
  mlp.cfg.pe_freqs = int(get_u32(f.get()));
  mlp.cfg.geo_hidden = int(get_u32(f.get()));
  mlp.cfg.geo_layers = int(get_u32(f.get()));
  mlp.cfg.skip_at = int(get_u32(f.get()));
  mlp.cfg.feature_dim = int(get_u32(f.get()));
  mlp.cfg.color_hidden = int(get_u32(f.get()));
  mlp.cfg.color_layers = int(get_u32(f.get()));
  mlp.cfg.softplus_beta = get_f32(f.get());
  mlp.log_s = get_f32(f.get());
  for (int a = 0; a < 3; ++a) mlp.norm_center[a] = get_f32(f.get());
  mlp.norm_scale = get_f32(f.get());
  for (int a = 0; a < 3; ++a) mlp.domain_lo[a] = get_f32(f.get());
  for (int a = 0; a < 3; ++a) mlp.domain_hi[a] = get_f32(f.get());
  mlp.allocate();
  mlp.for_each_param([&](MatX<float>& m) {
    const MatX<float> loaded = get_mat(f.get());
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols())
      throw std::runtime_error("sdf checkpoint: layer shape mismatch in " + path);
    m = loaded;
  });
  return mlp;
}

}  // namespace splatsdf::sdf
