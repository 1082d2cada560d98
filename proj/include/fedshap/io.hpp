#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedshap/simulator.hpp"

namespace fedshap {

/// Serializes records with the fixed column set
/// t,selected,val_loss,test_loss,test_acc,sv_json,utility_evals,ms.
/// selected is a ';'-joined id list and sv_json a JSON object keyed by
/// client id; floats round-trip exactly.
void write_round_records_csv(std::ostream& out, const std::vector<RoundRecord>& records);
std::string round_records_to_csv(const std::vector<RoundRecord>& records);

std::vector<RoundRecord> read_round_records_csv(const std::string& path);

/// Full config echo, including the seed, so a run is re-creatable from its
/// artifacts alone.
std::string config_to_json(const SimConfig& cfg);

/// 64-bit FNV-1a over the canonical config JSON, as a 16-digit hex string.
std::string config_hash(const SimConfig& cfg);

/// Writes records.csv and config.json under out_dir/run-<hash>/ and returns
/// that directory.
std::filesystem::path write_run_result(const std::filesystem::path& out_dir,
                                       const RunResult& result);

struct PlotSeries {
  std::string label;
  std::vector<double> accuracy;  // indexed by round
};

/// Line chart of test accuracy versus communication round; one polyline per
/// series, labeled axes, well-formed standalone SVG.
std::string render_accuracy_svg(const std::vector<PlotSeries>& series);

}  // namespace fedshap
