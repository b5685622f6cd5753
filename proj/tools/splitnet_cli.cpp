// splitnet run | sweep | compare | gen-data
//
// SPLITNET_OUTPUT_ROOT, when set, prefixes relative output directories that
// were not given with --out.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "splitnet/splitnet.h"

namespace {

struct ConfigHandle {
  spn_config* p = nullptr;
  ~ConfigHandle() { spn_config_free(p); }
};

int report(spn_status st, const char* what) {
  std::fprintf(stderr, "splitnet %s: %s\n", what, spn_last_error());
  return static_cast<int>(st);
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Reads output_dir back out of the config.
std::string output_dir_of(const spn_config* cfg) {
  char* text = nullptr;
  if (spn_config_to_json(cfg, &text) != SPN_OK) return {};
  std::string doc(text);
  spn_string_free(text);
  const std::string key = "\"output_dir\": \"";
  auto pos = doc.find(key);
  if (pos == std::string::npos) return {};
  pos += key.size();
  std::string out;
  for (; pos < doc.size() && doc[pos] != '"'; ++pos) {
    if (doc[pos] == '\\' && pos + 1 < doc.size()) ++pos;
    out += doc[pos];
  }
  return out;
}

spn_status apply_output(spn_config* cfg, const std::optional<std::string>& out) {
  std::string dir;
  if (out) {
    dir = *out;
  } else {
    const char* root = std::getenv("SPLITNET_OUTPUT_ROOT");
    const std::string current = output_dir_of(cfg);
    if (!root || !*root || std::filesystem::path(current).is_absolute()) return SPN_OK;
    dir = (std::filesystem::path(root) / current).string();
  }
  return spn_config_set(cfg, "output_dir", json_string(dir).c_str());
}

int cmd_run(const std::string& config, const std::optional<std::string>& variant,
            const std::optional<unsigned long long>& seed, const std::optional<std::string>& out) {
  ConfigHandle cfg;
  if (auto st = spn_config_from_file(config.c_str(), &cfg.p)) return report(st, "run");
  if (variant) {
    if (auto st = spn_config_set(cfg.p, "variant", json_string(*variant).c_str())) {
      return report(st, "run");
    }
  }
  if (seed) {
    if (auto st = spn_config_set(cfg.p, "seed", std::to_string(*seed).c_str())) {
      return report(st, "run");
    }
  }
  if (auto st = apply_output(cfg.p, out)) return report(st, "run");

  spn_run* run = nullptr;
  if (auto st = spn_run_experiment(cfg.p, 1, &run)) return report(st, "run");
  const std::size_t n = spn_run_epoch_count(run);
  for (std::size_t i = 0; i < n; ++i) {
    spn_epoch e;
    spn_run_epoch(run, i, &e);
    std::printf("epoch %3d  test_acc %.4f  |C| %zu  mask %zu  tau_mu %.3f  tau_nu %.3f\n", e.epoch,
                e.test_acc, e.n_clean_set, e.mask_count, e.tau_mu, e.tau_nu);
  }
  char* summary = nullptr;
  spn_run_summary_json(run, &summary);
  std::printf("%s\nwrote %s\n", summary, output_dir_of(cfg.p).c_str());
  spn_string_free(summary);
  spn_run_free(run);
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& grid_path,
              const std::optional<std::string>& out) {
  ConfigHandle cfg;
  if (auto st = spn_config_from_file(config.c_str(), &cfg.p)) return report(st, "sweep");
  if (auto st = apply_output(cfg.p, out)) return report(st, "sweep");
  std::ifstream in(grid_path);
  if (!in) {
    std::fprintf(stderr, "splitnet sweep: cannot open %s\n", grid_path.c_str());
    return SPN_ERR_IO;
  }
  const std::string grid((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t points = 0;
  if (auto st = spn_sweep(cfg.p, grid.c_str(), &points)) return report(st, "sweep");
  std::printf("%zu points, table at %s/sweep.csv\n", points, output_dir_of(cfg.p).c_str());
  return 0;
}

int cmd_compare(const std::string& a, const std::string& b, double tol) {
  char* text = nullptr;
  const spn_status st = spn_compare(a.c_str(), b.c_str(), tol, &text);
  if (text) {
    std::fputs(text, stdout);
    spn_string_free(text);
  }
  if (st == SPN_ERR_THRESHOLD_EXCEEDED) {
    std::printf("deltas exceed tolerance %g\n", tol);
    return 1;
  }
  if (st != SPN_OK) return report(st, "compare");
  return 0;
}

int cmd_gen_data(const std::string& spec, const std::optional<std::string>& out) {
  ConfigHandle cfg;
  if (auto st = spn_config_from_file(spec.c_str(), &cfg.p)) return report(st, "gen-data");
  if (auto st = apply_output(cfg.p, std::nullopt)) return report(st, "gen-data");
  const std::string path =
      out ? *out : (std::filesystem::path(output_dir_of(cfg.p)) / "train.csv").string();
  spn_dataset* ds = nullptr;
  if (auto st = spn_dataset_generate(cfg.p, &ds)) return report(st, "gen-data");
  spn_status st = spn_dataset_save(ds, path.c_str());
  spn_dataset_info info{};
  spn_dataset_info_get(ds, &info);
  spn_dataset_free(ds);
  if (st) return report(st, "gen-data");
  std::printf("wrote %s (N=%zu, d=%d, r=%d, %zu corrupted)\n", path.c_str(), info.n,
              info.feature_dim, info.num_classes, info.noisy_count);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SplitNet noisy-label training on synthetic benchmarks"};
  app.require_subcommand(1);

  std::string config, grid, dir_a, dir_b, spec;
  std::optional<std::string> variant, out, data_out;
  std::optional<unsigned long long> seed;
  double tol = 0.0;

  auto* run = app.add_subcommand("run", "Train one variant and write its reports");
  run->add_option("--config", config, "Flat JSON config")->required()->check(CLI::ExistingFile);
  run->add_option("--variant", variant,
                  "full | no_splitnet | no_warmup | no_hedging | fixed_threshold(T) | plain_ce");
  run->add_option("--seed", seed, "Master seed");
  run->add_option("--out", out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of a grid");
  sweep->add_option("--config", config, "Base config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--grid", grid, "JSON object of key -> value list")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Sweep root directory");

  auto* compare = app.add_subcommand("compare", "Diff two runs' summary.json");
  compare->add_option("A", dir_a, "Baseline run directory")->required();
  compare->add_option("B", dir_b, "Candidate run directory")->required();
  compare->add_option("--tol", tol, "Largest tolerated |delta|")->check(CLI::NonNegativeNumber);

  auto* gen = app.add_subcommand("gen-data", "Write the noisy training set as CSV");
  gen->add_option("--spec", spec, "Config holding the dataset keys")
      ->required()
      ->check(CLI::ExistingFile);
  gen->add_option("--out", data_out, "CSV path (default <output_dir>/train.csv)");

  CLI11_PARSE(app, argc, argv);

  if (*run) return cmd_run(config, variant, seed, out);
  if (*sweep) return cmd_sweep(config, grid, out);
  if (*compare) return cmd_compare(dir_a, dir_b, tol);
  return cmd_gen_data(spec, data_out);
}
