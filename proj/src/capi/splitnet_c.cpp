#include "splitnet/splitnet.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "core/config.hpp"
#include "core/harness.hpp"
#include "core/main_loop.hpp"
#include "core/risk_hedging.hpp"

struct spn_config {
  splitnet::ExperimentConfig cfg;
};

struct spn_run {
  splitnet::RunReport report;
};

struct spn_dataset {
  splitnet::NoisyDataset data;
  splitnet::DatasetProvenance prov;
};

namespace {

thread_local std::string g_last_error;

spn_status set_error(spn_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename F>
spn_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SPN_OK;
  } catch (const splitnet::Error& e) {
    return set_error(static_cast<spn_status>(static_cast<int>(e.code())), e.what());
  } catch (const nlohmann::json::exception& e) {
    return set_error(SPN_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(SPN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(SPN_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* name) {
  if (!p) splitnet::fail(splitnet::ErrorCode::InvalidArgument, std::string(name) + " is NULL");
}

}  // namespace

extern "C" {

const char* spn_last_error(void) { return g_last_error.c_str(); }

const char* spn_version(void) { return "0.1.0"; }

void spn_string_free(char* s) { std::free(s); }

spn_status spn_config_default(spn_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new spn_config{};
  });
}

spn_status spn_config_from_file(const char* path, spn_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new spn_config{splitnet::load_config(path)};
  });
}

spn_status spn_config_from_json(const char* json, spn_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      splitnet::fail(splitnet::ErrorCode::Config, std::string("malformed JSON: ") + e.what());
    }
    *out = new spn_config{splitnet::config_from_json(doc)};
  });
}

spn_status spn_config_set(spn_config* cfg, const char* key, const char* value_json) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value_json, "value_json");
    nlohmann::json v;
    try {
      v = nlohmann::json::parse(value_json);
    } catch (const nlohmann::json::exception&) {
      splitnet::fail(splitnet::ErrorCode::Config, std::string(key) + ": value is not valid JSON");
    }
    splitnet::ExperimentConfig next = cfg->cfg;
    splitnet::set_config_value(next, key, v);
    next.validate();
    cfg->cfg = std::move(next);
  });
}

spn_status spn_config_to_json(const spn_config* cfg, char** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = dup_string(splitnet::config_to_json(cfg->cfg).dump(2));
  });
}

void spn_config_free(spn_config* cfg) { delete cfg; }

spn_status spn_run_experiment(const spn_config* cfg, int write_files, spn_run** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    auto run = std::make_unique<spn_run>();
    run->report = splitnet::run_experiment(cfg->cfg, write_files != 0);
    *out = run.release();
  });
}

spn_status spn_run_summary_json(const spn_run* run, char** out) {
  return guarded([&] {
    need(run, "run");
    need(out, "out");
    *out = dup_string(splitnet::summary_to_json(run->report.summary).dump(2));
  });
}

size_t spn_run_epoch_count(const spn_run* run) { return run ? run->report.epochs.size() : 0; }

spn_status spn_run_epoch(const spn_run* run, size_t index, spn_epoch* out) {
  return guarded([&] {
    need(run, "run");
    need(out, "out");
    if (index >= run->report.epochs.size()) {
      splitnet::fail(splitnet::ErrorCode::InvalidArgument, "epoch index out of range");
    }
    const auto& r = run->report.epochs[index];
    *out = spn_epoch{r.epoch,          r.tau_mu,
                     r.tau_nu,         r.n_clean_set,
                     r.eta,            r.mask_count,
                     r.pseudo_correct, r.pseudo_wrong,
                     r.split_f1_splitnet, r.split_f1_gmm,
                     r.split_acc_splitnet, r.split_acc_gmm,
                     r.test_acc};
  });
}

void spn_run_free(spn_run* run) { delete run; }

spn_status spn_sweep(const spn_config* cfg, const char* grid_json, size_t* points_out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(grid_json, "grid_json");
    nlohmann::json grid;
    try {
      grid = nlohmann::json::parse(grid_json);
    } catch (const nlohmann::json::exception& e) {
      splitnet::fail(splitnet::ErrorCode::Config, std::string("grid: malformed JSON: ") + e.what());
    }
    auto points = splitnet::run_sweep(cfg->cfg, grid);
    if (points_out) *points_out = points.size();
  });
}

spn_status spn_compare(const char* dir_a, const char* dir_b, double tol, char** report_out) {
  bool exceeded = false;
  spn_status st = guarded([&] {
    need(dir_a, "dir_a");
    need(dir_b, "dir_b");
    auto cmp = splitnet::compare_reports(dir_a, dir_b, tol);
    exceeded = cmp.exceeded;
    if (report_out) {
      std::string text;
      char line[256];
      std::snprintf(line, sizeof line, "%-26s %22s %22s %22s\n", "metric", "a", "b", "delta");
      text += line;
      for (const auto& d : cmp.deltas) {
        std::snprintf(line, sizeof line, "%-26s %22.17g %22.17g %22.17g\n", d.name.c_str(), d.a,
                      d.b, d.delta);
        text += line;
      }
      *report_out = dup_string(text);
    }
  });
  if (st == SPN_OK && exceeded) {
    return set_error(SPN_ERR_THRESHOLD_EXCEEDED, "at least one delta exceeds the tolerance");
  }
  return st;
}

spn_status spn_dataset_generate(const spn_config* cfg, spn_dataset** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    auto bench = splitnet::make_benchmark(cfg->cfg);
    *out = new spn_dataset{std::move(bench.train), {cfg->cfg.noise, cfg->cfg.seed}};
  });
}

spn_status spn_dataset_load(const char* csv_path, spn_dataset** out) {
  return guarded([&] {
    need(csv_path, "csv_path");
    need(out, "out");
    splitnet::DatasetProvenance prov;
    auto data = splitnet::load_dataset_csv(csv_path, &prov);
    *out = new spn_dataset{std::move(data), prov};
  });
}

spn_status spn_dataset_save(const spn_dataset* ds, const char* csv_path) {
  return guarded([&] {
    need(ds, "ds");
    need(csv_path, "csv_path");
    splitnet::save_dataset_csv(ds->data, ds->prov, csv_path);
  });
}

spn_status spn_dataset_info_get(const spn_dataset* ds, spn_dataset_info* out) {
  return guarded([&] {
    need(ds, "ds");
    need(out, "out");
    *out = spn_dataset_info{ds->data.size(), ds->data.feature_dim(), ds->data.num_classes(),
                            ds->data.noisy_count()};
  });
}

void spn_dataset_free(spn_dataset* ds) { delete ds; }

spn_status spn_compute_thresholds(double mean, double variance, double pivot, double* tau_mu,
                                  double* tau_nu) {
  return guarded([&] {
    need(tau_mu, "tau_mu");
    need(tau_nu, "tau_nu");
    auto t = splitnet::compute_thresholds(mean, variance, pivot);
    *tau_mu = t.tau_mu;
    *tau_nu = t.tau_nu;
  });
}

spn_status spn_dynamic_threshold(double s_clean, double s_noisy, double beta1, double beta2,
                                 double* out) {
  return guarded([&] {
    need(out, "out");
    *out = splitnet::dynamic_threshold(splitnet::SplitScore{s_clean, s_noisy}, beta1, beta2);
  });
}

}  // extern "C"
