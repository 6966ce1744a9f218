#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kinseq/checkpoint.hpp"
#include "kinseq/config.hpp"
#include "kinseq/csv.hpp"
#include "kinseq/retrieval.hpp"
#include "kinseq/synth.hpp"
#include "kinseq/train.hpp"

namespace fs = std::filesystem;
using namespace kinseq;

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

RunConfig build_config(const std::string& config_path,
                       const Overrides& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = load_run_config(config_path);
  for (const auto& [k, v] : overrides) apply_key(cfg, k, v);
  return cfg;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

std::vector<Trajectory> load_data(const RunConfig& cfg) {
  require(!cfg.data.empty(), "no data path set (config key 'data')");
  return load_corpus(cfg.data);
}

void check_channels(const ModelConfig& mc,
                    const std::vector<Trajectory>& corpus) {
  for (const auto& t : corpus)
    if (t.channels() != mc.n_x)
      throw ConfigError("trial " + t.subject_id + "/" + t.trial_id + " has " +
                        std::to_string(t.channels()) +
                        " channels but n_x = " + std::to_string(mc.n_x));
}

fs::path ensure_out(const RunConfig& cfg) {
  require(!cfg.out.empty(), "no output directory set (config key 'out')");
  fs::create_directories(cfg.out);
  return cfg.out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json metrics_json(const Metrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

nlohmann::json report_json(const EvalReport& rep) {
  nlohmann::json j;
  j["activity"] = rep.activity;
  j["tau"] = rep.tau;
  j["stride"] = rep.stride;
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : rep.pairs) {
    auto pj = metrics_json(p.metrics);
    pj["source"] = p.source;
    pj["target"] = p.target;
    j["pairs"].push_back(pj);
  }
  j["per_source"] = nlohmann::json::array();
  for (const auto& s : rep.per_source) {
    auto sj = metrics_json(s.metrics);
    sj["subject"] = s.subject;
    j["per_source"].push_back(sj);
  }
  j["mean"] = metrics_json(rep.mean);
  j["std"] = metrics_json(rep.stddev);
  return j;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

void run_synth(const RunConfig& cfg, bool force) {
  require(!cfg.out.empty(), "no output directory set (config key 'out')");
  const SynthConfig sc = cfg.synth();
  const auto corpus = synthesize_corpus(sc);
  write_corpus(cfg.out, corpus, sc, force);
  std::cout << "wrote " << corpus.size() << " trials to " << cfg.out << "\n";
}

void run_train(const RunConfig& cfg, const std::string& resume) {
  const auto out = ensure_out(cfg);
  auto corpus = load_data(cfg);
  check_channels(cfg.model, corpus);
  const Index window = cfg.model.t_past + cfg.model.t_future;
  for (const auto& t : corpus)
    if (t.length() < window)
      throw ConfigError("trial " + t.subject_id + "/" + t.trial_id + " has " +
                        std::to_string(t.length()) +
                        " frames; t_past + t_future = " +
                        std::to_string(window));
  for (const auto& id : cfg.train.heldout_subjects)
    if (std::none_of(corpus.begin(), corpus.end(),
                     [&](const Trajectory& t) { return t.subject_id == id; }))
      throw ConfigError("held-out subject '" + id + "' not in the corpus");

  ChannelStats stats;
  TrainState state;
  if (!resume.empty()) {
    Checkpoint cp = load_checkpoint(resume);
    const auto& a = cp.model.config;
    const auto& b = cfg.model;
    if (a.n_x != b.n_x || a.n_h != b.n_h || a.n_c != b.n_c ||
        a.t_past != b.t_past || a.t_future != b.t_future ||
        a.variant != b.variant || a.bridge != b.bridge || a.seed != b.seed)
      throw ConfigError("resume: checkpoint model config differs from the "
                        "run config");
    if (!cp.has_optimizer || cp.rng_state.empty())
      throw ConfigError("resume: checkpoint lacks optimizer or rng state");
    stats = cp.stats;
    state.model = std::move(cp.model);
    state.adam = std::move(cp.adam);
    state.step = cp.step;
    state.rng.restore(cp.rng_state);
  } else {
    std::vector<Trajectory> training;
    for (const auto& t : corpus)
      if (std::find(cfg.train.heldout_subjects.begin(),
                    cfg.train.heldout_subjects.end(),
                    t.subject_id) == cfg.train.heldout_subjects.end())
        training.push_back(t);
    require(!training.empty(), "every subject is held out");
    stats = compute_stats(training);
    state = train_init(cfg.model, cfg.train);
  }

  const auto std_corpus = standardize_all(std::move(corpus), stats);
  const auto write_ckpt = [&](const TrainState& st, const fs::path& p) {
    save_checkpoint(
        p, Checkpoint{st.model, stats, true, st.adam, st.step,
                      st.rng.state()});
  };
  const TrainHook hook = [&](const TrainState& st, const TrainReport&) {
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_step_%06llu.kseq",
                  static_cast<unsigned long long>(st.step));
    write_ckpt(st, out / name);
  };

  const auto report = train(state, std_corpus, cfg.train, hook);
  write_ckpt(state, out / "model.kseq");
  save_report_csv(out / "train_report.csv", report);
  save_stats(out / "stats.json", stats);

  std::cout << "trained " << to_string(cfg.model.variant) << " for "
            << state.step << " steps";
  if (!report.evals.empty())
    std::cout << "; final held-out nll " << report.evals.back().heldout_nll;
  std::cout << "\n";
}

void run_encode(const RunConfig& cfg, const std::string& ckpt_path) {
  const auto out = ensure_out(cfg);
  const Checkpoint cp = load_checkpoint(ckpt_path);
  auto corpus = load_data(cfg);
  check_channels(cp.model.config, corpus);
  const auto std_corpus = standardize_all(std::move(corpus), cp.stats);

  const fs::path file = out / "encodings.csv";
  std::ofstream os(file);
  if (!os) throw DataError("cannot write " + file.string());
  os << "subject,trial,start_index";
  for (Index i = 0; i < cp.model.config.n_h; ++i) os << ",e_" << i;
  os << "\n";
  std::size_t rows = 0;
  for (const auto& t : std_corpus) {
    if (t.length() < cp.model.config.t_past) continue;
    for (const auto& enc :
         encode_segment(cp.model, t, Span{0, t.length()}, cfg.stride)) {
      os << enc.span.subject_id << "," << enc.span.trial_id << ","
         << enc.span.start;
      for (Index i = 0; i < enc.e.size(); ++i) os << "," << fmt(enc.e[i]);
      os << "\n";
      ++rows;
    }
  }
  std::cout << "wrote " << rows << " encodings to " << file.string() << "\n";
}

std::vector<std::pair<Index, Index>> intervals_at(const Vec& scores,
                                                  double tau) {
  std::vector<std::pair<Index, Index>> out;
  Index begin = -1;
  for (Index f = 0; f <= scores.size(); ++f) {
    const bool on = f < scores.size() && scores[f] >= tau;
    if (on && begin < 0) begin = f;
    if (!on && begin >= 0) {
      out.emplace_back(begin, f);
      begin = -1;
    }
  }
  return out;
}

void run_query(const RunConfig& cfg, const std::string& ckpt_path,
               const std::string& query_subject,
               std::vector<std::string> targets) {
  const auto out = ensure_out(cfg);
  require(!cfg.activity.empty(), "no activity set (config key 'activity')");
  require(!query_subject.empty(), "no query subject given");
  const double tau = cfg.threshold.value_or(0.7);

  const Checkpoint cp = load_checkpoint(ckpt_path);
  auto corpus = load_data(cfg);
  check_channels(cp.model.config, corpus);
  const auto std_corpus = standardize_all(std::move(corpus), cp.stats);

  bool subject_found = false, activity_found = false;
  for (const auto& t : std_corpus) {
    if (t.subject_id != query_subject) continue;
    subject_found = true;
    for (const auto& seg : label_segments(t))
      if (seg.label == cfg.activity) activity_found = true;
  }
  require(subject_found, "subject '" + query_subject + "' not in the corpus");
  if (!activity_found)
    throw DataError("activity '" + cfg.activity + "' absent for subject '" +
                    query_subject + "'");

  std::vector<Trajectory> sub;
  for (const auto& t : std_corpus) {
    const bool is_target =
        targets.empty() ||
        std::find(targets.begin(), targets.end(), t.subject_id) !=
            targets.end();
    if (t.subject_id == query_subject || is_target) sub.push_back(t);
  }

  const RetrievalIndex index(cp.model, sub, cfg.activity, cfg.stride,
                             /*allow_self_target=*/true, query_subject);
  const EvalReport rep = index.evaluate(tau);
  const auto scores = index.combined_scores(query_subject);

  nlohmann::json j;
  j["activity"] = cfg.activity;
  j["query_subject"] = query_subject;
  j["tau"] = tau;
  j["stride"] = cfg.stride;
  j["targets"] = nlohmann::json::array();
  for (const auto& p : rep.pairs) {
    if (!targets.empty() &&
        std::find(targets.begin(), targets.end(), p.target) == targets.end())
      continue;
    nlohmann::json tj;
    tj["subject"] = p.target;
    tj["metrics"] = metrics_json(p.metrics);
    tj["trials"] = nlohmann::json::array();
    for (const auto& ts : scores) {
      if (ts.subject != p.target) continue;
      nlohmann::json rj = nlohmann::json::array();
      for (const auto& [a, b] : intervals_at(ts.scores, tau))
        rj.push_back({a, b});
      tj["trials"].push_back({{"trial", ts.trial}, {"retrieved", rj}});
    }
    j["targets"].push_back(tj);
  }
  write_json(out / "query.json", j);
  std::cout << "wrote " << (out / "query.json").string() << "\n";
}

void run_eval(const RunConfig& cfg, const std::string& ckpt_path) {
  const auto out = ensure_out(cfg);
  require(!cfg.activity.empty(), "no activity set (config key 'activity')");

  const Checkpoint cp = load_checkpoint(ckpt_path);
  auto corpus = load_data(cfg);
  check_channels(cp.model.config, corpus);
  const auto std_corpus = standardize_all(std::move(corpus), cp.stats);

  const auto in_val = [&](const Trajectory& t) {
    return std::find(cfg.val_subjects.begin(), cfg.val_subjects.end(),
                     t.subject_id) != cfg.val_subjects.end();
  };

  double tau = 0;
  std::string tau_source;
  std::vector<SweepPoint> sweep;
  std::vector<Trajectory> eval_corpus;
  if (cfg.threshold) {
    tau = *cfg.threshold;
    tau_source = "explicit";
    eval_corpus = std_corpus;
  } else {
    require(!cfg.val_subjects.empty(),
            "set a threshold or val_subjects for the sweep");
    std::vector<Trajectory> val_corpus;
    for (const auto& t : std_corpus)
      (in_val(t) ? val_corpus : eval_corpus).push_back(t);
    require(!val_corpus.empty(), "no trials match val_subjects");
    require(!eval_corpus.empty(), "every subject is in val_subjects");
    const RetrievalIndex val_index(cp.model, val_corpus, cfg.activity,
                                   cfg.stride);
    sweep = val_index.sweep(-1.0, 1.0, 0.01);
    double best = -1;
    for (const auto& p : sweep)
      if (p.mean.f1 > best) {
        best = p.mean.f1;
        tau = p.tau;
      }
    tau_source = "sweep";
  }

  const RetrievalIndex index(cp.model, eval_corpus, cfg.activity, cfg.stride);
  const EvalReport rep = index.evaluate(tau);

  nlohmann::json j = report_json(rep);
  j["tau_source"] = tau_source;
  j["val_subjects"] = cfg.val_subjects;
  j["eval_subjects"] = index.subjects();
  if (!sweep.empty()) {
    j["sweep"] = nlohmann::json::array();
    for (const auto& p : sweep) {
      auto pj = metrics_json(p.mean);
      pj["tau"] = p.tau;
      j["sweep"].push_back(pj);
    }
  }
  write_json(out / "eval.json", j);
  std::printf("%s tau=%.2f precision %.3f +- %.3f recall %.3f +- %.3f f1 "
              "%.3f +- %.3f\n",
              cfg.activity.c_str(), tau, rep.mean.precision,
              rep.stddev.precision, rep.mean.recall, rep.stddev.recall,
              rep.mean.f1, rep.stddev.f1);
}

void run_predict(const RunConfig& cfg, const std::string& ckpt_path,
                 const std::string& subject, const std::string& trial,
                 Index start, int k, const std::string& mixtures) {
  const auto out = ensure_out(cfg);
  require(k >= 1, "k must be >= 1");
  const Checkpoint cp = load_checkpoint(ckpt_path);
  if (!cp.model.config.mdn_head() && k > 1)
    throw ConfigError("variant " + to_string(cp.model.config.variant) +
                      " is deterministic; use k = 1");
  auto corpus = load_data(cfg);
  check_channels(cp.model.config, corpus);

  const Trajectory* traj = nullptr;
  for (const auto& t : corpus)
    if (t.subject_id == subject && t.trial_id == trial) traj = &t;
  require(traj != nullptr, "trial " + subject + "/" + trial +
                               " not in the corpus");
  const Index t_past = cp.model.config.t_past;
  if (start < 0 || start + t_past > traj->length())
    throw DataError("window [" + std::to_string(start) + ", " +
                    std::to_string(start + t_past) + ") outside trial of " +
                    std::to_string(traj->length()) + " frames");

  const Trajectory std_traj = standardize(*traj, cp.stats);
  const Mat past = std_traj.frames.middleCols(start, t_past);
  Rng rng(cfg.model.seed);
  const auto futures = predict_futures(cp.model, past, k, rng);

  const fs::path file = out / "futures.csv";
  std::ofstream os(file);
  if (!os) throw DataError("cannot write " + file.string());
  os << "sample,step";
  for (Index i = 0; i < cp.model.config.n_x; ++i) os << ",ch_" << i;
  os << "\n";
  for (std::size_t s = 0; s < futures.size(); ++s) {
    const Mat raw =
        (futures[s].array().colwise() * cp.stats.stddev.array()).matrix()
            .colwise() +
        cp.stats.mean;
    for (Index t = 0; t < raw.cols(); ++t) {
      os << s << "," << t;
      for (Index i = 0; i < raw.rows(); ++i) os << "," << fmt(raw(i, t));
      os << "\n";
    }
  }
  std::cout << "wrote " << futures.size() << " sampled futures to "
            << file.string() << "\n";

  if (!mixtures.empty()) {
    const auto enc = encode(cp.model, past);
    const auto dec = decode(cp.model, enc.e);
    nlohmann::json j;
    j["space"] = "standardized";
    j["steps"] = nlohmann::json::array();
    for (const auto& mix : dec.mixtures) {
      nlohmann::json sj;
      sj["pi"] = std::vector<double>(mix.pi.begin(), mix.pi.end());
      sj["mu"] = nlohmann::json::array();
      sj["v"] = nlohmann::json::array();
      for (const auto& mu : mix.mu)
        sj["mu"].push_back(std::vector<double>(mu.begin(), mu.end()));
      for (const auto& v : mix.v)
        sj["v"].push_back(std::vector<double>(v.begin(), v.end()));
      j["steps"].push_back(sj);
    }
    write_json(out / mixtures, j);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised motion representations via future prediction"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  bool force = false;
  std::string ckpt_path, resume, query_subject, subject, trial, mixtures;
  std::vector<std::string> targets;
  Index start = 0;
  int k = 1;

  const auto add_common = [&](CLI::App* sub,
                              std::initializer_list<const char*> keys) {
    sub->add_option("--config", config_path, "key = value config file");
    for (const char* key : keys) {
      const std::string k2 = key;
      sub->add_option_function<std::string>(
          "--" + k2, [&overrides, k2](const std::string& v) {
            overrides.emplace_back(k2, v);
          },
          "override config key '" + k2 + "'");
    }
  };

  auto* synth = app.add_subcommand("synth", "generate a labeled corpus");
  add_common(synth, {"seed", "out", "synth_subjects", "synth_trials",
                     "synth_channels", "synth_regimes", "synth_branch_factor",
                     "synth_noise", "synth_seg_min", "synth_seg_max"});
  synth->add_flag("--force", force, "overwrite an existing output directory");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd,
             {"seed", "out", "data", "variant", "steps", "batch_size",
              "learning_rate", "n_h", "n_c", "n_x", "t_past", "t_future",
              "eval_every", "eval_windows", "heldout_subjects",
              "decoder_bridge", "clip_norm"});
  train_cmd->add_option("--resume", resume, "checkpoint to continue from");

  auto* encode_cmd = app.add_subcommand("encode", "export window encodings");
  add_common(encode_cmd, {"seed", "out", "data", "stride"});
  encode_cmd->add_option("--checkpoint", ckpt_path)->required();

  auto* query_cmd =
      app.add_subcommand("query", "retrieve frames matching a motion query");
  add_common(query_cmd, {"seed", "out", "data", "stride", "threshold",
                         "activity"});
  query_cmd->add_option("--checkpoint", ckpt_path)->required();
  query_cmd->add_option("--query-subject", query_subject)->required();
  query_cmd->add_option("--target-subject", targets,
                        "target subjects (default: all others)");

  auto* eval_cmd = app.add_subcommand(
      "eval", "cross-subject retrieval metrics for one activity");
  add_common(eval_cmd, {"seed", "out", "data", "stride", "threshold",
                        "activity", "val_subjects"});
  eval_cmd->add_option("--checkpoint", ckpt_path)->required();

  auto* predict_cmd =
      app.add_subcommand("predict", "sample futures for one past window");
  add_common(predict_cmd, {"seed", "out", "data"});
  predict_cmd->add_option("--checkpoint", ckpt_path)->required();
  predict_cmd->add_option("--subject", subject)->required();
  predict_cmd->add_option("--trial", trial)->required();
  predict_cmd->add_option("--start", start)->required();
  predict_cmd->add_option("-k,--samples", k, "number of sampled futures");
  predict_cmd->add_option("--mixtures", mixtures,
                          "also write per-step mixture parameters (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = build_config(config_path, overrides);
    if (synth->parsed()) run_synth(cfg, force);
    else if (train_cmd->parsed()) run_train(cfg, resume);
    else if (encode_cmd->parsed()) run_encode(cfg, ckpt_path);
    else if (query_cmd->parsed()) run_query(cfg, ckpt_path, query_subject,
                                            targets);
    else if (eval_cmd->parsed()) run_eval(cfg, ckpt_path);
    else if (predict_cmd->parsed())
      run_predict(cfg, ckpt_path, subject, trial, start, k, mixtures);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
