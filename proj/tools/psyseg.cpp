// psyseg command-line front end.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "psyseg/evaluation.hpp"
#include "psyseg/server.hpp"
#include "psyseg/session.hpp"
#include "psyseg/synthetic.hpp"
#include "psyseg/viz.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace psyseg;

namespace {

struct Globals {
  std::string session_dir = "session";
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string config;
};

// Options shared by init, simulate and ablate; unset ones leave the config file's values alone.
struct Overrides {
  std::string image, oracle, variant, quotas, mode;
  int participant = 0, superpixels = 0, iterations = 0, quota = 0, epochs = 0;
  double margin = 0, factor = 0;
  bool serial = false, no_render = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--image", o.image, "PNG to segment (default: synthetic image)");
  cmd->add_option("--oracle", o.oracle, "oracle.json with the annotator's hierarchy");
  cmd->add_option("--participant", o.participant, "synthetic participant: 1 colour-first, 2 texture-first")
      ->check(CLI::Range(1, 2));
  cmd->add_option("--superpixels", o.superpixels, "SLIC target patch count");
  cmd->add_option("--variant", o.variant, "random | active | active+enhance");
  cmd->add_option("--quotas", o.quotas, "preset (synthetic|histology|aerial) or comma list");
  cmd->add_option("--iterations", o.iterations, "number of iterations");
  cmd->add_option("--quota", o.quota, "responses per iteration");
  cmd->add_option("--mode", o.mode, "oracle | interactive");
  cmd->add_option("--margin", o.margin, "dual-triplet margin");
  cmd->add_option("--epochs", o.epochs, "training epochs per iteration");
  cmd->add_option("--enhance", o.factor, "enhancement factor (total / answered)");
  cmd->add_flag("--serial", o.serial, "disable OpenMP kernels");
  cmd->add_flag("--no-render", o.no_render, "skip overlay rendering");
}

session::SessionConfig build_config(const Globals& g, const Overrides& o) {
  json j = json::object();
  if (!g.config.empty()) {
    std::ifstream in(g.config);
    if (!in) throw std::runtime_error("cannot open config " + g.config);
    j = json::parse(in);
  }
  if (!o.image.empty()) j["image"] = o.image;
  if (!o.oracle.empty()) j["oracle"] = o.oracle;
  if (o.participant) j["participant"] = o.participant;
  if (o.superpixels) j["superpixels"] = o.superpixels;
  if (!o.variant.empty()) j["variant"] = o.variant;
  if (!o.mode.empty()) j["mode"] = o.mode;
  if (g.seed_given || !j.contains("seed")) j["seed"] = g.seed;
  if (!o.quotas.empty()) {
    if (o.quotas.find_first_not_of("0123456789, ") == std::string::npos) {
      std::vector<int> q;
      std::stringstream ss(o.quotas);
      for (std::string part; std::getline(ss, part, ',');) q.push_back(std::stoi(part));
      j["quotas"] = q;
    } else {
      j["quotas"] = o.quotas;
    }
  }
  if (o.iterations || o.quota) {
    auto c = session::session_config_from_json(j);
    const int iters = o.iterations ? o.iterations : c.iterations();
    const int quota = o.quota ? o.quota : c.quotas.front();
    j["quotas"] = std::vector<int>(static_cast<std::size_t>(iters), quota);
  }
  if (o.margin > 0) j["training"]["margin"] = o.margin;
  if (o.epochs > 0) j["training"]["epochs"] = o.epochs;
  if (o.factor > 0) j["query"]["enhancement_factor"] = o.factor;
  if (o.serial) j["parallel"] = false;
  if (o.no_render) j["render"] = false;
  return session::session_config_from_json(j);
}

void print_report(const evaluation::EvaluationReport& r) {
  std::printf("iteration %d  responses %zu  enhanced %zu  dendrogram purity %.4f\n", r.iteration, r.responses,
              r.enhanced, r.dendrogram_purity);
}

int cmd_synth(const Globals& g, const std::string& scale, int width, int height) {
  auto spec = scale == "paper" ? imaging::SyntheticSpec::paper_scale() : imaging::SyntheticSpec::desk_scale();
  if (width) spec.width = width;
  if (height) spec.height = height;
  spec.seed = g.seed;
  const auto syn = imaging::generate_synthetic(spec);
  const fs::path dir = g.session_dir;
  fs::create_directories(dir);
  imaging::save_image(syn.image, dir / "synthetic.png");
  imaging::save_label_png(syn.truth, dir / "synthetic_truth.png");
  oracle::save_oracle({syn.color_first, {}}, dir / "participant1.json");
  oracle::save_oracle({syn.texture_first, {}}, dir / "participant2.json");
  std::printf("wrote %s/{synthetic.png, synthetic_truth.png, participant1.json, participant2.json} (%dx%d)\n",
              dir.c_str(), spec.width, spec.height);
  return 0;
}

int cmd_simulate(const Globals& g, const Overrides& o) {
  const fs::path dir = g.session_dir;
  auto s = fs::exists(dir / "state.json") ? session::Session::open(dir)
                                          : session::Session::create(dir, build_config(g, o));
  const auto t0 = std::chrono::steady_clock::now();
  while (s.phase() != session::Phase::Complete) {
    s.run_iteration();
    if (!s.reports().empty()) print_report(s.reports().back());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("done in %.1f s; hierarchy depth %d\n", secs, s.tree() ? s.tree()->depth() : 0);
  return 0;
}

int cmd_evaluate(const Globals& g) {
  auto s = session::Session::open(g.session_dir);
  if (!s.tree()) throw std::runtime_error("no hierarchy yet; run at least one iteration");
  if (!s.ground_truth()) throw std::runtime_error("session has no ground truth (oracle.json)");
  const auto r = evaluation::evaluate(*s.tree(), s.ground_truth()->patch_labels, s.iteration() - 1,
                                      s.answered_total(), s.responses().size() - s.answered_total(),
                                      session::to_string(s.config().variant));
  std::cout << evaluation::to_json(r).dump(2) << '\n';
  return 0;
}

int cmd_render(const Globals& g, int level, double alpha, bool patches) {
  auto s = session::Session::open(g.session_dir);
  if (!s.tree()) throw std::runtime_error("no hierarchy yet; run at least one iteration");
  if (level < 0 && alpha == viz::kDefaultOverlayAlpha && !patches) {
    s.render();
    std::printf("rendered levels 0..%d\n", s.tree()->depth());
    return 0;
  }
  const int lo = level < 0 ? 0 : level, hi = level < 0 ? s.tree()->depth() : level;
  for (int l = lo; l <= hi; ++l) {
    const auto pal = viz::make_palette(*s.tree(), l, s.embeddings(),
                                       patches ? viz::PaletteMode::Patches : viz::PaletteMode::NodeCentroids);
    imaging::save_image(viz::render_overlay(s.image(), s.superpixels(), *s.tree(), l, pal, alpha), s.overlay_path(l));
    std::printf("wrote %s\n", s.overlay_path(l).c_str());
  }
  return 0;
}

struct AblationRun {
  std::string label;
  std::uint64_t seed;
  double purity;
};

int cmd_ablate(const Globals& g, const Overrides& o, int seeds, std::vector<double> margins) {
  const fs::path root = fs::path(g.session_dir) / "ablation";
  fs::create_directories(root);
  std::vector<std::pair<std::string, Overrides>> arms;
  for (const char* v : {"random", "active", "active+enhance"}) {
    Overrides a = o;
    a.variant = v;
    arms.emplace_back(v, a);
  }
  for (double m : margins) {
    Overrides a = o;
    a.margin = m;
    char label[32];
    std::snprintf(label, sizeof label, "margin=%.2f", m);
    arms.emplace_back(label, a);
  }
  std::vector<AblationRun> runs;
  std::ofstream csv(root / "summary.csv");
  csv << "arm,seed,final_dendrogram_purity\n";
  for (const auto& [label, arm] : arms) {
    for (int k = 0; k < seeds; ++k) {
      Globals gk = g;
      gk.seed = g.seed + static_cast<std::uint64_t>(k);
      gk.seed_given = true;
      std::string tag = label;
      for (char& c : tag)
        if (c == '+' || c == '=') c = '_';
      const fs::path dir = root / (tag + "_s" + std::to_string(gk.seed));
      fs::remove_all(dir);
      auto s = session::Session::create(dir, build_config(gk, arm));
      s.run_all();
      const double p = s.reports().back().dendrogram_purity;
      runs.push_back({label, gk.seed, p});
      csv << label << ',' << gk.seed << ',' << p << '\n';
      std::printf("%-16s seed %llu  purity %.4f\n", label.c_str(), static_cast<unsigned long long>(gk.seed), p);
    }
  }
  std::printf("\n%-16s %s\n", "arm", "mean final purity");
  std::map<std::string, std::pair<double, int>> mean;
  for (const auto& r : runs) {
    mean[r.label].first += r.purity;
    mean[r.label].second += 1;
  }
  for (const auto& [label, arm] : arms) std::printf("%-16s %.4f\n", label.c_str(), mean[label].first / mean[label].second);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Psychometric 3AFC metric learning and hierarchical segmentation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--session-dir", g.session_dir, "session directory")->capture_default_str();
  app.add_option("--seed", g.seed, "master seed")->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--config", g.config, "session config JSON");

  auto* synth = app.add_subcommand("synth", "write a synthetic test image and its two participant hierarchies");
  std::string scale = "desk";
  int width = 0, height = 0;
  synth->add_option("--scale", scale, "desk (1200x600) or paper (3600x1800)")->check(CLI::IsMember({"desk", "paper"}));
  synth->add_option("--width", width);
  synth->add_option("--height", height);

  Overrides init_o, sim_o, abl_o;
  auto* init = app.add_subcommand("init", "compute superpixels and descriptors and open a session");
  add_overrides(init, init_o);
  auto* simulate = app.add_subcommand("simulate", "run the oracle annotation loop to completion");
  add_overrides(simulate, sim_o);

  auto* serve = app.add_subcommand("serve", "serve an interactive session over HTTP");
  std::string host = "127.0.0.1", static_dir, id;
  int port = 8080;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--static", static_dir, "directory of UI files served at /");
  serve->add_option("--id", id, "session id in URLs (default: directory name)");

  auto* evaluate = app.add_subcommand("evaluate", "score the current hierarchy against ground truth");

  auto* render = app.add_subcommand("render", "re-render segmentation overlays");
  int level = -1;
  double alpha = viz::kDefaultOverlayAlpha;
  bool patches = false;
  render->add_option("--level", level, "single level to render (default: all)");
  render->add_option("--alpha", alpha)->check(CLI::Range(0.0, 1.0));
  render->add_flag("--patch-colors", patches, "MDS over patch embeddings instead of node centroids");

  auto* ablate = app.add_subcommand("ablate", "random vs active vs active+enhance, plus a margin sweep");
  add_overrides(ablate, abl_o);
  int seeds = 3;
  std::vector<double> margins{0.2, 0.4, 0.8};
  ablate->add_option("--seeds", seeds, "master seeds per arm")->capture_default_str();
  ablate->add_option("--margins", margins, "constant margins to sweep (empty to skip)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(g, scale, width, height);
    if (*init) {
      auto s = session::Session::create(g.session_dir, build_config(g, init_o));
      std::printf("session %s: %d patches, %d iterations\n", g.session_dir.c_str(), s.superpixels().count(),
                  s.config().iterations());
      return 0;
    }
    if (*simulate) return cmd_simulate(g, sim_o);
    if (*serve) {
      const fs::path dir = g.session_dir;
      server::Service svc(static_dir);
      const std::string sid = id.empty() ? fs::weakly_canonical(dir).filename().string() : id;
      svc.add_session(sid, session::Session::open(dir));
      std::printf("serving session '%s' on http://%s:%d/\n", sid.c_str(), host.c_str(), port);
      std::fflush(stdout);
      svc.listen(host, port);
      return 0;
    }
    if (*evaluate) return cmd_evaluate(g);
    if (*render) return cmd_render(g, level, alpha, patches);
    if (*ablate) return cmd_ablate(g, abl_o, seeds, margins);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
