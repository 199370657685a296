// pwopsd: command-line front end for the diagnostic, identity checks,
// training harness, metrics and candidate-log scoring.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pwopsd/diagnostic.hpp"
#include "pwopsd/error.hpp"
#include "pwopsd/identities.hpp"
#include "pwopsd/io.hpp"
#include "pwopsd/metrics.hpp"
#include "pwopsd/objectives.hpp"
#include "pwopsd/parallel.hpp"
#include "pwopsd/stats.hpp"
#include "pwopsd/trainer.hpp"
#include "pwopsd/uncertainty.hpp"

using namespace pwopsd;

namespace {

// A flag that can also be set from a `--config` section.key entry.
struct Binding {
  std::string section;
  std::string key;
  CLI::Option* option = nullptr;
  std::function<void(const Json&)> assign;
};

std::set<std::string>& known_config_keys() {
  static std::set<std::string> keys;
  return keys;
}

struct Command {
  CLI::App* app = nullptr;
  std::vector<Binding> bindings;
  std::string config_path;

  template <typename T>
  CLI::Option* bind(const std::string& flag, const std::string& section, const std::string& key, T& var,
                    const std::string& help) {
    auto* opt = app->add_option(flag, var, help)->capture_default_str();
    bindings.push_back({section, key, opt, [&var](const Json& v) { var = v.get<T>(); }});
    known_config_keys().insert(section.empty() ? key : section + "." + key);
    return opt;
  }
};

struct Options {
  std::uint64_t seed = 0;
  int threads = default_thread_count();

  WorldConfig world;
  DiagnosticConfig diag;
  int resamples = 2000;
  double confidence = 0.95;

  TrainConfig train;
  std::string weighting = "position";
  std::string preset = "Moderate";
  std::string reduction = "per_sequence_mean";
  double gate_threshold = 0.0;
  int seeds = 3;

  int trials = 100;
  int sequence_trials = 50;
  int max_branches = 5;
  int max_vocab = 16;
  int depth = 3;
  int alphabet = 3;

  int gc_batches = 50;
  int gc_vocab = 32;
  int gc_sequences = 4;
  int gc_max_length = 16;
  double gc_step = 1e-5;

  std::vector<std::string> inputs;
  std::string gold_field = "gold";
  std::string samples_field = "samples";
  std::string id_field = "problem_id";
  std::string marker = "\\boxed{";

  std::vector<std::string> score_names;
  int top_m = 16;
  bool relabel = false;

  std::string out;
  std::string report_out;
  std::string candidates_out;
  std::string spines_out;
  std::string bins_out;
  std::string csv_out;
  std::string loss_out;
};

void add_common(Command& c, Options& o, bool threads) {
  c.app->add_option("--config", c.config_path, "JSON config; explicit flags take precedence");
  c.bind("--seed", "", "seed", o.seed, "root seed");
  if (threads) c.bind("--threads", "run", "threads", o.threads, "worker threads");
}

void add_world(Command& c, WorldConfig& w) {
  c.bind("--vocab-size", "world", "vocab_size", w.vocab_size, "vocabulary size");
  c.bind("--depth", "world", "depth", w.depth, "maximum episode length");
  c.bind("--branch-count", "world", "branch_count", w.branch_count, "alternatives per branch layer");
  c.bind("--early-dead-fraction", "world", "early_dead_fraction", w.early_dead_fraction,
         "dead probability of an alternative before normalized depth 0.4");
  c.bind("--late-dead-fraction", "world", "late_dead_fraction", w.late_dead_fraction,
         "dead probability of a later alternative");
  c.bind("--ambiguity-mass", "world", "ambiguity_mass", w.ambiguity_mass, "teacher mass on secondary alternatives");
  c.bind("--branch-density", "world", "branch_density", w.branch_density, "probability a layer branches");
  c.bind("--hard-fraction", "world", "hard_fraction", w.hard_fraction, "problems with a wrong greedy answer");
}

void add_labels(Command& c, LabelThresholds& th) {
  c.bind("--v-high", "labels", "v_high", th.v_high, "viability counted as high");
  c.bind("--v-low", "labels", "v_low", th.v_low, "every child below this is real-uncertain");
  c.bind("--min-high-children", "labels", "min_high_children", th.min_high_children,
         "high children needed for diversity");
}

void add_bootstrap(Command& c, Options& o) {
  c.bind("--resamples", "bootstrap", "resamples", o.resamples, "cluster bootstrap resamples");
  c.bind("--confidence", "bootstrap", "confidence", o.confidence, "confidence level of the interval");
}

void add_objective(Command& c, Options& o) {
  c.bind("--distill-temperature", "objective", "distill_temperature", o.train.objective.distill_temperature,
         "student softmax temperature");
  c.bind("--clip-threshold", "objective", "clip_threshold", o.train.objective.clip_threshold,
         "per-term forward-KL clip");
  c.bind("--weighting", "objective", "weighting", o.weighting, "uniform | position | entropy_gate")
      ->check(CLI::IsMember({"uniform", "position", "entropy_gate"}));
  c.bind("--preset", "objective", "preset", o.preset, "position schedule preset")
      ->check(CLI::IsMember({"Mild", "Moderate", "Sharp", "Aggressive"}, CLI::ignore_case));
  c.bind("--gate-threshold", "objective", "gate_threshold", o.gate_threshold,
         "entropy-gate threshold in nats; <= 0 uses ln(V)/2");
  c.bind("--reduction", "objective", "reduction", o.reduction, "global_token_mean | per_sequence_mean")
      ->check(CLI::IsMember({"global_token_mean", "per_sequence_mean"}));
}

void add_train(Command& c, Options& o) {
  c.bind("--learning-rate", "train", "learning_rate", o.train.learning_rate, "gradient-descent step size");
  c.bind("--steps", "train", "steps", o.train.steps, "training steps");
  c.bind("--batch-sequences", "train", "batch_sequences", o.train.batch_sequences, "rollouts per step");
  c.bind("--train-problems", "train", "train_problems", o.train.train_problems, "problems in the training pool");
  c.bind("--eval-samples", "train", "eval_samples", o.train.eval_samples, "samples per problem at evaluation");
}

Weighting make_weighting(const Options& o, int vocab) {
  if (o.weighting == "uniform") return UniformWeight{};
  if (o.weighting == "entropy_gate")
    return EntropyGate{o.gate_threshold > 0.0 ? o.gate_threshold : default_gate_threshold(vocab)};
  return PositionWeight{preset(o.preset)};
}

Reduction make_reduction(const std::string& name) {
  return name == "global_token_mean" ? Reduction::GlobalTokenMean : Reduction::PerSequenceMean;
}

void apply_config(Command& c) {
  if (c.config_path.empty()) return;
  const Json cfg = read_json(c.config_path);
  if (!cfg.is_object()) throw InvalidInput("config: top level must be an object");
  std::map<std::string, const Json*> entries;
  for (const auto& [section, value] : cfg.items()) {
    if (section == "seed") {
      entries["seed"] = &value;
      continue;
    }
    if (!value.is_object()) throw InvalidInput("config: unknown key '" + section + "'");
    for (const auto& [key, v] : value.items()) entries[section + "." + key] = &v;
  }
  for (const auto& [name, value] : entries)
    if (!known_config_keys().count(name)) throw InvalidInput("config: unknown key '" + name + "'");
  for (auto& b : c.bindings) {
    const auto it = entries.find(b.section.empty() ? b.key : b.section + "." + b.key);
    if (it == entries.end() || b.option->count() > 0) continue;
    try {
      b.assign(*it->second);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput("config: " + it->first + ": " + e.what());
    }
  }
}

void emit(const std::string& path, const std::string& contents, const std::string& command) {
  if (path.empty()) return;
  write_file(path, contents);
  write_sidecar(path, command);
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) row += ',';
    const auto& s = cells[i];
    if (s.find_first_of(",\"\n") == std::string::npos) {
      row += s;
    } else {
      row += '"';
      for (char ch : s) row += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      row += '"';
    }
  }
  return row + "\n";
}

std::string num(double v) { return format_number(v); }

// ---------------------------------------------------------------- diagnose

int run_diagnose(Options& o) {
  DiagnosticConfig cfg = o.diag;
  cfg.world = o.world;
  cfg.world.seed = o.seed;
  cfg.bootstrap.seed = o.seed;
  cfg.bootstrap.resamples = o.resamples;
  cfg.bootstrap.confidence = o.confidence;
  cfg.threads = o.threads;
  const auto report = run_diagnostic(cfg);

  Json scores = Json::array();
  for (const auto& s : report.scores) scores.push_back(to_json(s));
  Json summary{{"problems", report.problems},
               {"correct_spines", report.correct_spines},
               {"labeled_problems", report.labeled_problems},
               {"labels",
                {{"real_uncertain", report.real_uncertain},
                 {"diversity", report.diversity},
                 {"gray", report.gray}}},
               {"scores", scores}};

  std::vector<Json> spines, candidates;
  for (const auto& s : report.spines) spines.push_back(to_json(s));
  for (const auto& c : report.candidates) candidates.push_back(to_json(c));
  std::string bins = csv_row({"bin_lo", "bin_hi", "candidates", "failure_rate", "truth_viable_rate"});
  for (const auto& b : report.bins)
    bins += csv_row({num(b.lo), num(b.hi), std::to_string(b.candidates), num(b.failure_rate),
                     num(b.truth_viable_rate)});

  emit(o.report_out, summary.dump(2) + "\n", "diagnose");
  emit(o.spines_out, to_jsonl(spines), "diagnose");
  emit(o.candidates_out, to_jsonl(candidates), "diagnose");
  emit(o.bins_out, bins, "diagnose");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// -------------------------------------------------------------- identities

int run_identities(Options& o) {
  if (o.trials < 1 || o.sequence_trials < 0) throw InvalidInput("identities: trial counts must be positive");
  if (o.max_branches < 1 || o.max_vocab < 2) throw InvalidInput("identities: need max_branches >= 1, max_vocab >= 2");
  if (o.alphabet < 2 || o.alphabet > kMaxIdentityAlphabet || o.depth < 1 || o.depth > kMaxIdentityDepth)
    throw InvalidInput("identities: alphabet or depth outside the enumeration limits");

  double token_max = 0.0, token_sum = 0.0;
  for (int i = 0; i < o.trials; ++i) {
    Rng rng(derive_seed(o.seed, {0x746f6bULL, static_cast<std::uint64_t>(i)}));
    const int z = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.max_branches)));
    const int v = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.max_vocab - 1)));
    const auto mixture = random_mixture(rng, z, v);
    const auto gap = token_identity_gap(mixture, random_simplex(rng, v));
    token_max = std::max(token_max, gap);
    token_sum += gap;
  }
  double seq_max = 0.0, seq_sum = 0.0;
  for (int i = 0; i < o.sequence_trials; ++i) {
    Rng rng(derive_seed(o.seed, {0x736571ULL, static_cast<std::uint64_t>(i)}));
    const int z = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.max_branches)));
    const auto model = random_sequence_model(rng, z, o.alphabet, o.depth);
    const auto gap = sequence_identity_gap(model, random_tree(rng, o.alphabet, o.depth));
    seq_max = std::max(seq_max, gap);
    seq_sum += gap;
  }
  Json out{{"seed", o.seed},
           {"token", {{"trials", o.trials}, {"max_gap", token_max}, {"mean_gap", token_sum / o.trials}}},
           {"sequence",
            {{"trials", o.sequence_trials},
             {"alphabet", o.alphabet},
             {"depth", o.depth},
             {"max_gap", seq_max},
             {"mean_gap", o.sequence_trials > 0 ? seq_sum / o.sequence_trials : 0.0}}}};
  emit(o.out, out.dump(2) + "\n", "identities");
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------ train, sweep

TrainConfig train_config(const Options& o) {
  TrainConfig cfg = o.train;
  cfg.seed = o.seed;
  cfg.weighting = make_weighting(o, o.world.vocab_size);
  cfg.reduction = make_reduction(o.reduction);
  return cfg;
}

int run_train(Options& o) {
  WorldConfig world = o.world;
  world.seed = o.seed;
  const TrainConfig cfg = train_config(o);
  const auto report = run_training(cfg, world);
  Json out = to_json(report);
  out["weighting"] = weighting_name(cfg.weighting);
  out["reduction"] = reduction_name(cfg.reduction);
  out["seed"] = o.seed;
  out["initial_loss"] = report.loss.front();
  out["final_loss"] = tail_mean(report.loss);
  out["stable_tail"] = tail_non_increasing(report.loss);
  std::string loss = csv_row({"step", "loss"});
  for (std::size_t i = 0; i < report.loss.size(); ++i) loss += csv_row({std::to_string(i), num(report.loss[i])});
  emit(o.out, out.dump(2) + "\n", "train");
  emit(o.loss_out, loss, "train");
  Json summary{{"weighting", out["weighting"]},       {"reduction", out["reduction"]},
               {"initial_loss", out["initial_loss"]}, {"final_loss", out["final_loss"]},
               {"stable_tail", out["stable_tail"]},   {"final_eval", out["final_eval"]}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_sweep(Options& o) {
  WorldConfig world = o.world;
  world.seed = o.seed;
  const TrainConfig base = train_config(o);
  const auto cells = factorial_and_sweep(world, base, o.seeds, o.threads);

  const std::string n = std::to_string(base.eval_samples);
  std::string csv = csv_row({"group", "config", "avg@" + n + "_mean", "avg@" + n + "_sd", "pass@" + n + "_mean",
                             "pass@" + n + "_sd", "maj@" + n + "_mean", "maj@" + n + "_sd", "final_loss_mean",
                             "final_loss_sd", "stable_runs"});
  Json cells_json = Json::array();
  for (const auto& cell : cells) {
    std::vector<double> avg, pass, maj, loss;
    int stable = 0;
    Json runs = Json::array();
    for (std::size_t s = 0; s < cell.runs.size(); ++s) {
      const auto& r = cell.runs[s];
      avg.push_back(r.final_eval.avg);
      pass.push_back(r.final_eval.pass);
      maj.push_back(r.final_eval.maj);
      loss.push_back(tail_mean(r.loss));
      stable += tail_non_increasing(r.loss) ? 1 : 0;
      Json run = to_json(r);
      run["seed"] = base.seed + s;
      runs.push_back(run);
    }
    csv += csv_row({cell.group, cell.name, num(mean(avg)), num(sample_stddev(avg)), num(mean(pass)),
                    num(sample_stddev(pass)), num(mean(maj)), num(sample_stddev(maj)), num(mean(loss)),
                    num(sample_stddev(loss)), std::to_string(stable)});
    cells_json.push_back(Json{{"group", cell.group},
                              {"config", cell.name},
                              {"weighting", weighting_name(cell.weighting)},
                              {"reduction", reduction_name(cell.reduction)},
                              {"runs", runs}});
  }
  emit(o.out, Json{{"seed", o.seed}, {"seeds", o.seeds}, {"cells", cells_json}}.dump(2) + "\n", "sweep");
  emit(o.csv_out, csv, "sweep");
  std::cout << csv;
  return 0;
}

// ----------------------------------------------------------------- metrics

int run_metrics(Options& o) {
  if (o.inputs.empty()) throw InvalidInput("metrics: at least one --in is required");
  std::string csv = csv_row({"run", "problem_id", "avg", "pass", "maj"});
  std::vector<double> run_avg, run_pass, run_maj;
  for (std::size_t run = 0; run < o.inputs.size(); ++run) {
    const auto records = read_jsonl(o.inputs[run]);
    if (records.empty()) throw DegenerateInput("metrics: " + o.inputs[run] + " has no records");
    double a = 0.0, p = 0.0, m = 0.0;
    for (const auto& rec : records) {
      for (const auto& f : {o.id_field, o.gold_field, o.samples_field})
        if (!rec.is_object() || !rec.contains(f)) throw InvalidInput("metrics: record is missing field '" + f + "'");
      const auto& samples = rec.at(o.samples_field);
      if (!samples.is_array() || samples.empty()) throw InvalidInput("metrics: samples must be a non-empty array");
      std::vector<ExtractedAnswer> answers;
      for (const auto& s : samples) {
        if (s.is_null()) {
          answers.emplace_back(std::nullopt);
        } else if (s.is_string()) {
          answers.push_back(extract_final_answer(s.get<std::string>(), o.marker));
        } else {
          throw InvalidInput("metrics: samples must be strings");
        }
      }
      const auto& gold_json = rec.at(o.gold_field);
      const std::string gold = gold_json.is_string() ? gold_json.get<std::string>() : gold_json.dump();
      const auto& id_json = rec.at(o.id_field);
      const std::string id = id_json.is_string() ? id_json.get<std::string>() : id_json.dump();
      const auto metrics = problem_metrics(grade_and_cluster(answers, gold));
      csv += csv_row({std::to_string(run), id, num(metrics.avg_at_n), std::to_string(metrics.pass_at_n),
                      std::to_string(metrics.maj_at_n)});
      a += metrics.avg_at_n;
      p += metrics.pass_at_n;
      m += metrics.maj_at_n;
    }
    const auto count = static_cast<double>(records.size());
    run_avg.push_back(a / count);
    run_pass.push_back(p / count);
    run_maj.push_back(m / count);
    csv += csv_row({std::to_string(run), "mean", num(run_avg.back()), num(run_pass.back()), num(run_maj.back())});
  }
  if (o.inputs.size() > 1) {
    csv += csv_row({"all", "mean", num(mean(run_avg)), num(mean(run_pass)), num(mean(run_maj))});
    csv += csv_row({"all", "sd", num(sample_stddev(run_avg)), num(sample_stddev(run_pass)),
                    num(sample_stddev(run_maj))});
  }
  emit(o.out, csv, "metrics");
  std::cout << csv;
  return 0;
}

// --------------------------------------------------------------- gradcheck

int run_gradcheck(Options& o) {
  if (o.gc_batches < 1) throw InvalidInput("gradcheck: batches must be positive");
  ObjectiveConfig cfg = o.train.objective;
  const Weighting weighting = make_weighting(o, o.gc_vocab);
  const Reduction reduction = make_reduction(o.reduction);
  double rel = 0.0, abs_err = 0.0;
  std::size_t compared = 0, skipped = 0;
  for (int i = 0; i < o.gc_batches; ++i) {
    Rng rng(derive_seed(o.seed, {0x6763ULL, static_cast<std::uint64_t>(i)}));
    const auto batch = random_batch(rng, o.gc_vocab, o.gc_sequences, o.gc_max_length);
    const auto check = finite_difference_check(batch, cfg, weighting, reduction, o.gc_step);
    rel = std::max(rel, check.max_relative_error);
    abs_err = std::max(abs_err, check.max_absolute_error);
    compared += check.compared;
    skipped += check.skipped_at_kink;
  }
  Json out{{"seed", o.seed},
           {"batches", o.gc_batches},
           {"weighting", weighting_name(weighting)},
           {"reduction", reduction_name(reduction)},
           {"max_relative_error", rel},
           {"max_absolute_error", abs_err},
           {"compared", compared},
           {"skipped_at_kink", skipped}};
  emit(o.out, out.dump(2) + "\n", "gradcheck");
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------------- score

Eigen::VectorXd vector_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw InvalidInput(std::string("score: ") + what + " must be a non-empty array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidInput(std::string("score: ") + what + " must hold numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

void score_from_ensemble(CandidateRecord& c, const Json& rec, int top_m, double epsilon) {
  const auto& ens = rec.at("ensemble");
  if (!ens.is_array() || ens.size() < 2) throw InvalidInput("score: ensemble needs at least two members");
  const Eigen::VectorXd first = vector_from_json(ens[0], "ensemble member");
  Eigen::MatrixXd members(first.size(), static_cast<Eigen::Index>(ens.size()));
  for (std::size_t m = 0; m < ens.size(); ++m) {
    const Eigen::VectorXd col = vector_from_json(ens[m], "ensemble member");
    if (col.size() != first.size()) throw InvalidInput("score: ensemble members differ in length");
    members.col(static_cast<Eigen::Index>(m)) = col;
  }
  const Eigen::VectorXd reference =
      rec.contains("reference") ? vector_from_json(rec.at("reference"), "reference") : members.rowwise().mean().eval();
  std::vector<bool> mask(static_cast<std::size_t>(first.size()), true);
  if (rec.contains("valid_mask")) mask = rec.at("valid_mask").get<std::vector<bool>>();
  const auto u = score_ensemble(members, reference, mask, top_m, epsilon);
  c.scores["truncated_entropy"] = u.truncated_entropy;
  c.scores["mean_entropy"] = u.mean_entropy;
  c.scores["mutual_information"] = u.mutual_information;
  c.scores["neg_log_kappa"] = -u.log_kappa;
  c.h_trunc = u.truncated_entropy;
}

int run_score(Options& o) {
  if (o.inputs.size() != 1) throw InvalidInput("score: exactly one --in is required");
  std::vector<CandidateRecord> candidates;
  for (const auto& rec : read_jsonl(o.inputs.front())) {
    CandidateRecord c = candidate_from_json(rec);
    if (rec.contains("ensemble")) score_from_ensemble(c, rec, o.top_m, o.diag.kappa_epsilon);
    if (c.spine_length > 0 && !c.scores.count("oriented_position"))
      c.scores["oriented_position"] = position_scores(c.spine_pos, c.spine_length).oriented;
    if (!c.label || o.relabel) {
      o.diag.thresholds.validate();
      if (c.viabilities.empty()) throw InvalidInput("score: candidate " + c.problem_id + " has neither label nor viabilities");
      c.label = label_candidate(c.viabilities, o.diag.thresholds);
    }
    candidates.push_back(std::move(c));
  }
  if (candidates.empty()) throw DegenerateInput("score: no candidates");

  std::vector<std::string> names = o.score_names;
  if (names.empty()) {
    for (const auto& [name, v] : candidates.front().scores) {
      bool everywhere = true;
      for (const auto& c : candidates) everywhere = everywhere && c.scores.count(name) > 0;
      if (everywhere) names.push_back(name);
    }
  }
  if (names.empty()) throw InvalidInput("score: no score is present on every candidate");

  BootstrapConfig boot;
  boot.seed = o.seed;
  boot.resamples = o.resamples;
  boot.confidence = o.confidence;
  boot.threads = o.threads;
  Json scores = Json::array();
  for (const auto& r : score_report(candidates, names, boot)) scores.push_back(to_json(r));
  Json out{{"candidates", candidates.size()}, {"scores", scores}};

  std::vector<Json> records;
  for (const auto& c : candidates) records.push_back(to_json(c));
  emit(o.out, out.dump(2) + "\n", "score");
  emit(o.candidates_out, to_jsonl(records), "score");
  std::cout << out.dump(2) << "\n";
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << Json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Position-weighted on-policy self-distillation lab"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;
  std::map<CLI::App*, std::pair<Command, std::function<int(Options&)>>> commands;

  auto make = [&](const std::string& name, const std::string& help) -> Command& {
    auto* sub = app.add_subcommand(name, help);
    auto& slot = commands[sub];
    slot.first.app = sub;
    return slot.first;
  };

  {
    auto& c = make("diagnose", "branch-viability diagnostic on the synthetic world");
    add_common(c, o, true);
    add_world(c, o.world);
    auto& f = o.diag.filter;
    c.bind("--problems", "diagnostic", "problems", o.diag.problems, "problems to generate");
    c.bind("--p2-min", "filter", "p2_min", f.p2_min, "minimum second-largest teacher probability");
    c.bind("--ratio-min", "filter", "ratio_min", f.ratio_min, "minimum p2/p1");
    c.bind("--spacing", "filter", "spacing", f.spacing, "minimum distance between candidates");
    c.bind("--max-candidates", "filter", "max_candidates_per_problem", f.max_candidates_per_problem,
           "candidates per problem");
    c.bind("--top-m", "filter", "top_m", f.top_m, "tokens kept by the truncated entropy");
    c.bind("--top-children", "filter", "top_children", f.top_children, "children forced per candidate");
    add_labels(c, o.diag.thresholds);
    add_bootstrap(c, o);
    c.bind("--continuations", "diagnostic", "continuations", o.diag.continuations, "rollouts per forced child");
    c.bind("--ensemble-size", "diagnostic", "ensemble_size", o.diag.ensemble_size, "perturbed teacher passes");
    c.bind("--perturbation", "diagnostic", "perturbation", o.diag.perturbation, "logit noise scale of the ensemble");
    c.bind("--kappa-epsilon", "diagnostic", "kappa_epsilon", o.diag.kappa_epsilon, "floor of the precision estimate");
    c.app->add_option("--report-out", o.report_out, "report JSON");
    c.app->add_option("--candidates-out", o.candidates_out, "candidate JSONL");
    c.app->add_option("--spines-out", o.spines_out, "spine JSONL");
    c.app->add_option("--bins-out", o.bins_out, "failure rate by position CSV");
    commands[c.app].second = run_diagnose;
  }
  {
    auto& c = make("identities", "random checks of the branch-mixture identity");
    add_common(c, o, false);
    c.bind("--trials", "identities", "trials", o.trials, "token-level mixtures");
    c.bind("--sequence-trials", "identities", "sequence_trials", o.sequence_trials, "sequence-level models");
    c.bind("--max-branches", "identities", "max_branches", o.max_branches, "largest number of branches");
    c.bind("--max-vocab", "identities", "max_vocab", o.max_vocab, "largest token vocabulary");
    c.bind("--alphabet", "identities", "alphabet", o.alphabet, "sequence alphabet size");
    c.bind("--depth", "identities", "depth", o.depth, "sequence length");
    c.app->add_option("--out", o.out, "JSON output");
    commands[c.app].second = run_identities;
  }
  for (const std::string name : {"train", "sweep"}) {
    auto& c = make(name, name == "train" ? "one distillation run on the synthetic world"
                                         : "weighting x reduction factorial and preset sweep");
    add_common(c, o, name == "sweep");
    add_world(c, o.world);
    add_objective(c, o);
    add_train(c, o);
    c.app->add_option("--out", o.out, "JSON report");
    if (name == "train") {
      c.app->add_option("--loss-out", o.loss_out, "loss trace CSV");
      commands[c.app].second = run_train;
    } else {
      c.bind("--seeds", "train", "seeds", o.seeds, "seeds per cell");
      c.app->add_option("--csv-out", o.csv_out, "per-cell summary CSV");
      commands[c.app].second = run_sweep;
    }
  }
  {
    auto& c = make("metrics", "Avg@N, Pass@N and Maj@N from sampled answers");
    add_common(c, o, false);
    c.app->add_option("--in", o.inputs, "JSONL with one record per problem; repeat for several seeds")->required();
    c.bind("--gold-field", "metrics", "gold_field", o.gold_field, "field holding the gold answer");
    c.bind("--samples-field", "metrics", "samples_field", o.samples_field, "field holding the sample texts");
    c.bind("--id-field", "metrics", "id_field", o.id_field, "field holding the problem id");
    c.bind("--marker", "metrics", "marker", o.marker, "opening marker of the final answer");
    c.app->add_option("--out", o.out, "CSV output");
    commands[c.app].second = run_metrics;
  }
  {
    auto& c = make("gradcheck", "analytic vs central-difference loss gradients on random batches");
    add_common(c, o, false);
    add_objective(c, o);
    c.bind("--batches", "gradcheck", "batches", o.gc_batches, "random batches");
    c.bind("--vocab", "gradcheck", "vocab", o.gc_vocab, "vocabulary size");
    c.bind("--sequences", "gradcheck", "sequences", o.gc_sequences, "sequences per batch");
    c.bind("--max-length", "gradcheck", "max_length", o.gc_max_length, "longest sequence");
    c.bind("--step", "gradcheck", "step", o.gc_step, "finite-difference step");
    c.app->add_option("--out", o.out, "JSON output");
    commands[c.app].second = run_gradcheck;
  }
  {
    auto& c = make("score", "AUROC report for externally produced candidate logs");
    add_common(c, o, true);
    c.app->add_option("--in", o.inputs, "candidate JSONL")->required();
    c.app->add_option("--scores", o.score_names, "score names; default every score on every candidate");
    c.bind("--top-m", "filter", "top_m", o.top_m, "tokens kept by the truncated entropy");
    c.bind("--kappa-epsilon", "diagnostic", "kappa_epsilon", o.diag.kappa_epsilon, "floor of the precision estimate");
    c.app->add_flag("--relabel", o.relabel, "recompute labels from viabilities");
    add_labels(c, o.diag.thresholds);
    add_bootstrap(c, o);
    c.app->add_option("--out", o.out, "report JSON");
    c.app->add_option("--candidates-out", o.candidates_out, "scored candidate JSONL");
    commands[c.app].second = run_score;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    for (auto& [sub, entry] : commands) {
      if (!sub->parsed()) continue;
      apply_config(entry.first);
      if (o.threads < 1) throw InvalidInput("threads must be positive");
      return entry.second(o);
    }
    return 2;
  } catch (const DegenerateInput& e) {
    print_error("degenerate_input", e.what());
    return 3;
  } catch (const InvalidInput& e) {
    print_error("invalid_input", e.what());
    return 2;
  } catch (const NumericDomain& e) {
    print_error("numeric_domain", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
}
