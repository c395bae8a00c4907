#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "creditlab/simkernel.hpp"

namespace creditlab {

// ---- generator config as a file ---------------------------------------------

// Fields absent from the file keep their default values; the saved form
// always spells out everything, so save(load(x)) is byte-stable.
GenConfig gen_config_from_json(const std::string& text);
std::string gen_config_to_json(const GenConfig& cfg);
GenConfig load_gen_config(const std::string& path);   // validates
void save_gen_config(const GenConfig& cfg, const std::string& path);

// ---- universe datasets as files -----------------------------------------------

// One row per application: identity, application-time fields under their
// data-dictionary names, and the ground-truth default_k targets.
void write_production_csv(const World& w, Product p, const std::string& path);

// One row per account-month: cid, period, paid/due/days/left, status, product.
void write_transactions_csv(const World& w, Product p, const std::string& path);

// ---- run manifests --------------------------------------------------------------

// Audit record of one command run. Everything except the timing block is a
// pure function of the inputs; timings are wall-clock and vary run to run.
struct RunManifest {
  std::string command;
  std::string config_digest;   // hex FNV-1a of the config JSON text
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, double>> timings;   // stage -> seconds
  std::vector<std::pair<std::string, double>> metrics;   // achieved values
};

std::string manifest_to_json(const RunManifest& m);
void save_manifest(const RunManifest& m, const std::string& path);

std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);

}  // namespace creditlab
