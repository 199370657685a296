#include "pwopsd/io.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "pwopsd/error.hpp"
#include "pwopsd/rng.hpp"

namespace pwopsd {

namespace {

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InvalidInput(std::string("record is missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

Json to_json(const Spine& spine) {
  return Json{{"problem_id", spine.problem_id},
              {"tokens", spine.tokens},
              {"correct", spine.correct},
              {"gold_answer", spine.gold_answer}};
}

Spine spine_from_json(const Json& j) {
  Spine s;
  s.problem_id = field<std::string>(j, "problem_id");
  s.tokens = field<std::vector<int>>(j, "tokens");
  s.correct = field<bool>(j, "correct");
  s.gold_answer = field<std::string>(j, "gold_answer");
  return s;
}

Json to_json(const CandidateRecord& c) {
  Json children = Json::array();
  for (const auto& ch : c.children) children.push_back(Json{{"token", ch.token}, {"prob", ch.prob}});
  Json j{{"problem_id", c.problem_id},
         {"spine_pos", c.spine_pos},
         {"spine_length", c.spine_length},
         {"h_trunc", c.h_trunc},
         {"children", children},
         {"viabilities", c.viabilities}};
  j["label"] = c.label ? Json(std::string(to_string(*c.label))) : Json(nullptr);
  Json scores = Json::object();
  for (const auto& [k, v] : c.scores) scores[k] = v;
  j["scores"] = scores;
  if (!c.truth.empty()) j["truth"] = c.truth;
  return j;
}

CandidateRecord candidate_from_json(const Json& j) {
  CandidateRecord c;
  c.problem_id = field<std::string>(j, "problem_id");
  c.spine_pos = field<int>(j, "spine_pos");
  c.spine_length = j.contains("spine_length") ? field<int>(j, "spine_length") : 0;
  c.h_trunc = j.contains("h_trunc") ? field<double>(j, "h_trunc") : 0.0;
  if (j.contains("children"))
    for (const auto& ch : j.at("children")) c.children.push_back({field<int>(ch, "token"), field<double>(ch, "prob")});
  if (j.contains("viabilities")) c.viabilities = field<std::vector<double>>(j, "viabilities");
  if (j.contains("label") && !j.at("label").is_null()) c.label = label_from_string(field<std::string>(j, "label"));
  if (j.contains("scores")) c.scores = field<std::map<std::string, double>>(j, "scores");
  if (j.contains("truth")) c.truth = field<std::vector<bool>>(j, "truth");
  if (c.spine_pos < 0) throw InvalidInput("candidate " + c.problem_id + ": negative spine_pos");
  return c;
}

Json to_json(const ScoreReport& r) {
  return Json{{"score_name", r.score_name},   {"point_auroc", r.point_auroc},
              {"ci", {r.ci_low, r.ci_high}},  {"auprc", r.auprc},
              {"n_pos", r.n_pos},             {"n_neg", r.n_neg},
              {"n_problems", r.n_problems},   {"n_degenerate", r.n_degenerate},
              {"seed", r.seed},               {"rng_id", std::string(kRngId)}};
}

Json to_json(const PositionBin& b) {
  return Json{{"lo", b.lo},
              {"hi", b.hi},
              {"candidates", b.candidates},
              {"failure_rate", b.failure_rate},
              {"truth_viable_rate", b.truth_viable_rate}};
}

Json to_json(const EvalSummary& e) { return Json{{"avg", e.avg}, {"pass", e.pass}, {"maj", e.maj}}; }

Json to_json(const TrainReport& r) {
  return Json{{"loss", r.loss},
              {"initial_eval", to_json(r.initial_eval)},
              {"final_eval", to_json(r.final_eval)},
              {"gradient_profile", r.gradient_profile},
              {"gradcheck_relative_error", r.gradcheck_relative_error}};
}

std::vector<Json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::vector<Json> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

std::string to_jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

std::string format_number(double v) { return Json(v).dump(); }

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path);
  out << contents;
  if (!out) throw InvalidInput("failed writing " + path);
}

void write_sidecar(const std::string& path, const std::string& command) {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  Json meta{{"command", command}, {"unix_time", secs}, {"rng_id", std::string(kRngId)}};
  write_file(path + ".meta.json", meta.dump(2) + "\n");
}

}  // namespace pwopsd
