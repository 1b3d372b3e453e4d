#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "splatsdf/core/parallel.hpp"
#include "splatsdf/gs/rasterizer.hpp"
#include "splatsdf/io/png_io.hpp"
#include "splatsdf/io/ply_io.hpp"
#include "splatsdf/mesh/marching_cubes.hpp"
#include "splatsdf/mesh/mesh.hpp"
#include "splatsdf/mesh/metrics.hpp"
#include "splatsdf/scene/dataset.hpp"
#include "splatsdf/scene/synth.hpp"
#include "splatsdf/train/ssim.hpp"
#include "splatsdf/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace splatsdf;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

int verbosity() {
  const char* v = std::getenv("SPLATSDF_LOG");
  return v ? std::atoi(v) : 1;
}

std::string view_base(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d", i);
  return buf;
}

Image color_image(const gs::RenderTarget<float>& rt) {
  Image img(rt.width, rt.height, 3);
  for (int y = 0; y < rt.height; ++y)
    for (int x = 0; x < rt.width; ++x)
      img.set_rgb(x, y, rt.color[size_t(y) * rt.width + x]);
  return img.clamped01();
}

int cmd_synth(const std::string& spec_path, const std::string& out, std::uint64_t seed) {
  scene::SceneSpec spec =
      spec_path == "default" ? scene::default_room_spec() : scene::parse_scene_spec(spec_path);
  const scene::Dataset ds = scene::synthesize(spec, seed);
  scene::save_dataset(out, ds);
  if (verbosity() > 0)
    std::cerr << "synth: " << ds.views.size() << " views, " << ds.init_points.size()
              << " sfm points -> " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& config, const std::string& out,
              int threads, bool plot) {
  train::TrainConfig cfg;
  if (!config.empty()) cfg = train::load_config(config);
  if (threads > 0) cfg.threads = threads;
  const scene::Dataset ds = scene::load_dataset(data);
  const auto t0 = std::chrono::steady_clock::now();
  const train::TrainState st = train::train(ds, cfg, out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (verbosity() > 0)
    std::cerr << "train: " << st.iteration << " iterations, cloud " << st.cloud.size()
              << " primitives, " << secs << " s\n";
  if (plot) {
    // loss curve as a simple polyline plot from log.txt
    std::ifstream log(fs::path(out) / "log.txt");
    std::vector<double> losses;
    std::string line;
    while (std::getline(log, line)) {
      const auto pos = line.find("loss=");
      if (pos == std::string::npos) continue;
      losses.push_back(std::atof(line.c_str() + pos + 5));
    }
    if (!losses.empty()) {
      const int w = 640, h = 360;
      Image img(w, h, 3, 1.f);
      double lo = losses[0], hi = losses[0];
      for (double v : losses) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi <= lo) hi = lo + 1;
      auto ypix = [&](double v) {
        return std::clamp(int((1.0 - (v - lo) / (hi - lo)) * (h - 20)) + 10, 0, h - 1);
      };
      for (size_t i = 0; i + 1 < losses.size(); ++i) {
        const int x0 = int(10 + (w - 20) * double(i) / losses.size());
        const int x1 = int(10 + (w - 20) * double(i + 1) / losses.size());
        const int y0 = ypix(losses[i]), y1 = ypix(losses[i + 1]);
        const int steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
        for (int s = 0; s <= steps; ++s) {
          const int x = x0 + (x1 - x0) * s / steps;
          const int y = y0 + (y1 - y0) * s / steps;
          img.set_rgb(x, y, {0.8f, 0.2f, 0.1f});
        }
      }
      io::write_png8((fs::path(out) / "loss.png").string(), img);
    }
  }
  return 0;
}

int cmd_mesh(const std::string& sdf_path, int res, const std::string& out) {
  const sdf::SdfMlp<float> mlp = sdf::load_mlp(sdf_path);
  BoundingBox box{mlp.domain_lo, mlp.domain_hi};
  if (box.extent().minCoeff() <= 0)
    throw std::runtime_error("mesh: checkpoint has no stored scene box");
  mesh::TriangleMesh m = mesh::extract_mesh(mlp, box, res);
  m = mesh::cleanup(m);
  io::write_mesh_ply(out, m);
  if (verbosity() > 0)
    std::cerr << "mesh: " << m.vertices.size() << " vertices, " << m.triangles.size()
              << " triangles -> " << out << "\n";
  return 0;
}

int cmd_render(const std::string& cloud_path, const std::string& cameras, const std::string& out,
               bool normalize_normals) {
  const gs::GaussianCloud<float> cloud = gs::load_cloud_ply(cloud_path);
  const scene::Dataset ds = scene::load_dataset(cameras);
  fs::create_directories(out);
  gs::RasterizeOptions<float> opts;
  opts.normalize_normals = normalize_normals;
  const float depth_scale = 10.f;
  for (size_t i = 0; i < ds.views.size(); ++i) {
    const auto rt = gs::rasterize(cloud, ds.views[i].camera, opts);
    const std::string base = (fs::path(out) / view_base(int(i))).string();
    io::write_png8(base + ".png", color_image(rt));
    Image depth(rt.width, rt.height, 1);
    for (size_t p = 0; p < rt.depth.size(); ++p)
      depth.data[p] = std::clamp(rt.depth[p] / depth_scale, 0.f, 1.f);
    io::write_png16(base + "_depth.png", depth);
    Image nimg(rt.width, rt.height, 3);
    for (int y = 0; y < rt.height; ++y)
      for (int x = 0; x < rt.width; ++x) {
        Vec3<float> n = rt.normal[size_t(y) * rt.width + x];
        const float len = n.norm();
        if (len > 1e-6f) n /= len;
        nimg.set_rgb(x, y, n);
      }
    io::write_png16(base + "_normal.png", io::encode_normal_map(nimg));
  }
  if (verbosity() > 0) std::cerr << "render: " << ds.views.size() << " views -> " << out << "\n";
  return 0;
}

int cmd_eval_geo(const std::string& pred, const std::string& gt, double tau,
                 const std::string& cameras, bool no_crop, int samples, std::uint64_t seed,
                 const std::string& report) {
  mesh::TriangleMesh pm = io::read_mesh_ply(pred);
  mesh::TriangleMesh gm = io::read_mesh_ply(gt);
  std::vector<Vec3<float>> ps = mesh::sample_surface(pm, samples, seed);
  std::vector<Vec3<float>> gs_pts = mesh::sample_surface(gm, samples, seed + 1);
  if (!cameras.empty() && !no_crop) {
    const scene::Dataset ds = scene::load_dataset(cameras);
    std::vector<scene::Camera<float>> cams;
    for (const auto& v : ds.views) cams.push_back(v.camera);
    ps = mesh::frustum_filter(ps, cams);
    gs_pts = mesh::frustum_filter(gs_pts, cams);
  }
  const mesh::GeoMetrics m = mesh::geo_metrics(ps, gs_pts, tau);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "tau %.6g\naccuracy %.6g\ncompletion %.6g\nprecision %.6g\nrecall %.6g\n"
                "f_score %.6g\n",
                m.tau, m.accuracy, m.completion, m.precision, m.recall, m.f_score);
  std::cout << buf;
  if (!report.empty()) {
    std::ofstream r(report);
    r << buf;
  }
  return 0;
}

int cmd_eval_img(const std::string& pred, const std::string& gt) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(pred)) {
    const std::string stem = e.path().stem().string();
    if (e.path().extension() != ".png") continue;
    if (stem.size() > 6 && (stem.ends_with("_depth") || stem.ends_with("_normal"))) continue;
    files.push_back(e.path().filename());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("eval-img: no view_*.png files in " + pred);
  double psum = 0, ssum = 0;
  std::printf("%-18s %10s %10s\n", "image", "psnr", "ssim");
  for (const auto& f : files) {
    const Image a = io::read_png((fs::path(pred) / f).string());
    const Image b = io::read_png((fs::path(gt) / f).string());
    const double p = mesh::psnr(a, b);
    const double s = train::ssim(a, b);
    psum += p;
    ssum += s;
    std::printf("%-18s %10.6g %10.6g\n", f.string().c_str(), p, s);
  }
  std::printf("%-18s %10.6g %10.6g\n", "mean", psum / files.size(), ssum / files.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splat + neural SDF indoor reconstruction pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = logical cores)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic room dataset");
  std::string spec = "default", out, data, config, sdf_path, cloud_path, cameras, pred, gt;
  std::string report;
  std::uint64_t seed = 1;
  synth->add_option("--spec", spec, "scene spec file, or 'default'");
  synth->add_option("--out", out, "output dataset directory")->required();
  synth->add_option("--seed", seed, "rng seed");

  auto* train_cmd = app.add_subcommand("train", "run the optimization schedule");
  bool plot = false;
  train_cmd->add_option("--data", data, "dataset directory")->required();
  train_cmd->add_option("--config", config, "key=value config file");
  train_cmd->add_option("--out", out, "run output directory")->required();
  train_cmd->add_flag("--plot", plot, "emit loss.png from the loss log");

  auto* mesh_cmd = app.add_subcommand("mesh", "extract the SDF zero level set");
  int res = 128;
  mesh_cmd->add_option("--sdf", sdf_path, "sdf checkpoint (.bin)")->required();
  mesh_cmd->add_option("--res", res, "marching cubes resolution");
  mesh_cmd->add_option("--out", out, "output mesh (.ply)")->required();

  auto* render_cmd = app.add_subcommand("render", "rasterize a cloud for every camera");
  bool normalize_normals = false;
  render_cmd->add_option("--cloud", cloud_path, "cloud checkpoint (.ply)")->required();
  render_cmd->add_option("--cameras", cameras, "dataset directory providing cameras")->required();
  render_cmd->add_option("--out", out, "output image directory")->required();
  render_cmd->add_flag("--normalize-normals", normalize_normals,
                       "divide blended normals by accumulated alpha");

  auto* eval_geo = app.add_subcommand("eval-geo", "point-metric comparison of two meshes");
  double tau = 0.05;
  int samples = 100000;
  bool no_crop = false;
  eval_geo->add_option("--pred", pred, "predicted mesh (.ply)")->required();
  eval_geo->add_option("--gt", gt, "ground-truth mesh (.ply)")->required();
  eval_geo->add_option("--tau", tau, "distance threshold (scene units)");
  eval_geo->add_option("--cameras", cameras, "dataset dir; crops to the camera frusta");
  eval_geo->add_flag("--no-crop", no_crop, "disable the frustum crop");
  eval_geo->add_option("--samples", samples, "points sampled per mesh");
  eval_geo->add_option("--seed", seed, "sampling seed");
  eval_geo->add_option("--report", report, "also write the metric report to this file");

  auto* eval_img = app.add_subcommand("eval-img", "PSNR/SSIM table between two image dirs");
  eval_img->add_option("--pred", pred, "predicted image directory")->required();
  eval_img->add_option("--gt", gt, "ground-truth image directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  if (threads > 0) ThreadPool::set_global_workers(threads);
  try {
    if (synth->parsed()) return cmd_synth(spec, out, seed);
    if (train_cmd->parsed()) return cmd_train(data, config, out, threads, plot);
    if (mesh_cmd->parsed()) return cmd_mesh(sdf_path, res, out);
    if (render_cmd->parsed()) return cmd_render(cloud_path, cameras, out, normalize_normals);
    if (eval_geo->parsed())
      return cmd_eval_geo(pred, gt, tau, cameras, no_crop, samples, seed, report);
    if (eval_img->parsed()) return cmd_eval_img(pred, gt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    return what.find("diverged") != std::string::npos ? kExitNumeric : kExitIo;
  }
  return kExitUsage;
}
