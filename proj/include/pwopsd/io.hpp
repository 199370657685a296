#pragma once

// JSON / JSONL / CSV serialization of records and reports.

#include <string>
#include <vector>

#include <json.hpp>

#include "pwopsd/diagnostic.hpp"
#include "pwopsd/trainer.hpp"
#include "pwopsd/viability.hpp"

namespace pwopsd {

using Json = nlohmann::ordered_json;

Json to_json(const Spine& spine);
Spine spine_from_json(const Json& j);

Json to_json(const CandidateRecord& c);
/// Accepts records with or without label, scores and truth.
CandidateRecord candidate_from_json(const Json& j);

/// {score_name, point_auroc, ci:[low,high], auprc, n_pos, n_neg, n_problems,
/// n_degenerate, seed, rng_id}
Json to_json(const ScoreReport& r);

Json to_json(const PositionBin& b);
Json to_json(const EvalSummary& e);
Json to_json(const TrainReport& r);

/// Reads one JSON value per non-blank line; parse errors become InvalidInput
/// naming the line.
std::vector<Json> read_jsonl(const std::string& path);
Json read_json(const std::string& path);

std::string to_jsonl(const std::vector<Json>& records);

/// Shortest round-trip decimal form, as used in every CSV and JSON output.
std::string format_number(double v);

/// Overwrites `path`; throws InvalidInput when it cannot be written.
void write_file(const std::string& path, const std::string& contents);

/// Writes `<path>.meta.json` with the wall-clock time and the command name.
/// Kept apart from primary outputs so those stay byte-identical across runs.
void write_sidecar(const std::string& path, const std::string& command);

}  // namespace pwopsd
