// rlvlm: corpus curation, contrastive training, reward-shaped RL and the
// analyses on top of them.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlvlm/analysis.hpp"
#include "rlvlm/contrastive.hpp"
#include "rlvlm/corpus.hpp"
#include "rlvlm/io.hpp"
#include "rlvlm/parallel.hpp"
#include "rlvlm/pipeline.hpp"
#include "rlvlm/ppo.hpp"
#include "rlvlm/rewardgen.hpp"

namespace fs = std::filesystem;
using namespace rlvlm;

namespace {

enum ExitCode { kOk = 0, kConfigFailure = 2, kDataFailure = 3, kNumericalFailure = 4 };

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Globals {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

// Writes the manifest last so that a directory with a manifest is complete.
void finish(const fs::path& out, const std::string& command, const json& config,
            std::vector<std::uint64_t> seeds, std::vector<std::string> inputs,
            std::vector<std::string> outputs) {
  RunManifest m;
  m.command = command;
  m.config = config;
  m.seeds = std::move(seeds);
  m.inputs = std::move(inputs);
  m.outputs = std::move(outputs);
  m.wall_clock = utc_now();
  write_manifest(out, m);
  std::cout << command << ": wrote " << m.outputs.size() << " file(s) to " << out.string() << "\n";
}

std::vector<RlCurvePoint> read_curve(const fs::path& p) {
  const Table t = read_table(p);
  const std::vector<std::string> want{"step", "success_rate", "mean_r_env", "mean_r_mc"};
  if (t.header() != want) throw DataError("'" + p.string() + "' is not a metrics table");
  std::vector<RlCurvePoint> c;
  try {
    for (const auto& r : t.rows()) c.push_back({std::stoul(r[0]), std::stod(r[1]), std::stod(r[2]), std::stod(r[3])});
  } catch (const std::logic_error&) {
    throw DataError("non-numeric cell in '" + p.string() + "'");
  }
  return c;
}

Table curve_table(const std::vector<RlCurvePoint>& curve) {
  Table t({"step", "success_rate", "mean_r_env", "mean_r_mc"});
  for (const auto& p : curve)
    t.row({Table::num(p.step), Table::num(p.success_rate), Table::num(p.mean_r_env), Table::num(p.mean_r_mc)});
  return t;
}

// ---------------------------------------------------------------------------
// pipeline

struct GenerateOpts {
  std::string out;
  CorpusConfig corpus;
};

void run_generate(const Globals& g, const GenerateOpts& o) {
  const fs::path out(o.out);
  const Corpus c = generate_synthetic_corpus(o.corpus, g.seed);
  write_records(out / "candidates.jsonl", c.train);
  write_records(out / "test.jsonl", c.test);
  std::vector<json> oracle;
  for (const auto& r : c.oracle) oracle.push_back(to_json(r));
  write_jsonl(out / "oracle.jsonl", oracle);
  finish(out, "pipeline generate", {{"corpus", to_json(o.corpus)}, {"seed", g.seed}}, {g.seed}, {},
         {"candidates.jsonl", "test.jsonl", "oracle.jsonl"});
}

struct FilterOpts {
  std::string in, out;
  double k_percent = 50.0;
};

void run_filter(const Globals& g, const FilterOpts& o) {
  if (!(o.k_percent > 0.0 && o.k_percent <= 100.0)) throw ConfigError("--k must be in (0, 100]");
  const fs::path out(o.out);
  const fs::path in = fs::path(o.in) / "candidates.jsonl";
  const auto labelled = correlation_filter(read_records(in), o.k_percent);
  std::vector<json> labels;
  std::vector<ClipRecord> selected;
  for (const auto& r : labelled) {
    labels.push_back({{"id", r.id}, {"label", label_name(r.label)}, {"global_score", r.global_score},
                      {"local_score", r.local_score}});
    if (is_selected(r.label)) selected.push_back(r);
  }
  write_jsonl(out / "labels.jsonl", labels);
  write_records(out / "selected.jsonl", selected);
  finish(out, "pipeline filter", {{"k_percent", o.k_percent}}, {g.seed}, {in.string()},
         {"labels.jsonl", "selected.jsonl"});
}

struct StatsOpts {
  std::string records, oracle, out;
};

void run_stats(const Globals& g, const StatsOpts& o) {
  const fs::path out(o.out);
  const auto records = read_records(o.records);
  std::map<std::string, std::size_t> by_label;
  std::size_t selected = 0, selected_aligned = 0, aligned = 0;
  double size_sum = 0.0, global_sum = 0.0;
  std::map<std::size_t, bool> truth;
  if (!o.oracle.empty()) {
    for (const json& j : read_jsonl(o.oracle)) {
      const RecordOracle r = oracle_from_json(j);
      truth[r.id] = r.aligned;
    }
  }
  for (const auto& r : records) {
    ++by_label[label_name(r.label)];
    size_sum += r.segment_size();
    global_sum += r.global_score;
    if (!o.oracle.empty()) {
      auto it = truth.find(r.id);
      if (it == truth.end()) throw DataError("record " + std::to_string(r.id) + " has no oracle entry");
      aligned += it->second;
      if (is_selected(r.label)) {
        ++selected;
        selected_aligned += it->second;
      }
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(records.size(), 1));
  Table t({"metric", "value"});
  t.row({"records", Table::num(records.size())});
  for (const char* l : {"unlabeled", "selected_local", "selected_global", "rejected"})
    t.row({std::string("label_") + l, Table::num(by_label[l])});
  t.row({"mean_segment_size", Table::num(size_sum / n)});
  t.row({"mean_global_score", Table::num(global_sum / n)});
  if (!o.oracle.empty()) {
    t.row({"aligned_fraction", Table::num(static_cast<double>(aligned) / n)});
    t.row({"selected_precision",
           selected ? Table::num(static_cast<double>(selected_aligned) / static_cast<double>(selected)) : "nan"});
  }
  t.write(out / "stats.tsv");
  std::vector<std::string> inputs{o.records};
  if (!o.oracle.empty()) inputs.push_back(o.oracle);
  finish(out, "pipeline stats", json::object(), {g.seed}, inputs, {"stats.tsv"});
}

// ---------------------------------------------------------------------------
// train contrastive

struct TrainOpts {
  std::string train, valid, out;
  TrainConfig cfg;
  SwapConfig swap;
  bool no_swap = false;
};

void run_train(const Globals& g, TrainOpts o) {
  const fs::path out(o.out);
  o.cfg.seed = g.seed;
  o.cfg.swap = !o.no_swap;
  const auto train_records = read_records(o.train);
  const auto valid_records = o.valid.empty() ? std::vector<ClipRecord>{} : read_records(o.valid);
  const TrainResult r = train(train_records, valid_records, o.cfg, o.swap);
  Table t({"epoch", "step", "train_loss", "eval_loss", "r1_v2t", "r1_t2v", "r5_v2t", "r5_t2v", "r10_v2t",
           "r10_t2v", "swaps"});
  for (const auto& m : r.metrics) {
    t.row({Table::num(m.epoch), Table::num(m.step), Table::num(m.train_loss), Table::num(m.eval_loss),
           Table::num(m.r1.video_to_text), Table::num(m.r1.text_to_video), Table::num(m.r5.video_to_text),
           Table::num(m.r5.text_to_video), Table::num(m.r10.video_to_text), Table::num(m.r10.text_to_video),
           Table::num(m.swaps)});
  }
  t.write(out / "metrics.tsv");
  const json config{{"train", to_json(o.cfg)}, {"swap", to_json(o.swap)}};
  Checkpoint ck{r.encoders, config, config_hash(config), Rng(g.seed).substream("data").state()};
  write_json_file(out / "checkpoint.json", to_json(ck));
  std::vector<std::string> inputs{o.train};
  if (!o.valid.empty()) inputs.push_back(o.valid);
  finish(out, "train contrastive", config, {g.seed}, inputs, {"metrics.tsv", "checkpoint.json"});
}

// ---------------------------------------------------------------------------
// rl

struct RlOpts {
  std::string reward = "sparse";
  std::string checkpoint, prompts, out;
  std::size_t seeds = 4;
  RlRunConfig run;
  bool no_flee = false;
  bool save_policy = false;
};

std::optional<RewardModel> load_reward_model(const std::string& checkpoint, const std::string& prompts,
                                             const HuntConfig& env, const RewardConfig& reward) {
  if (checkpoint.empty()) return std::nullopt;
  Checkpoint ck = read_checkpoint(checkpoint);
  PromptSet p = prompts.empty() ? build_prompt_set(ck.encoders.text, env.target_entity)
                                : prompts_from_json(read_json_file(prompts));
  return RewardModel(std::move(ck.encoders), std::move(p), reward);
}

void run_rl_train(const Globals& g, RlOpts o) {
  const fs::path out(o.out);
  if (o.seeds < 1) throw ConfigError("--seeds must be >= 1");
  o.run.source = parse_reward_source(o.reward);
  o.run.env.flee = !o.no_flee;
  if (o.run.source != RewardSource::sparse_only && o.checkpoint.empty())
    throw ConfigError("--reward " + o.reward + " needs --checkpoint");
  const auto model = o.run.source == RewardSource::sparse_only
                         ? std::nullopt
                         : load_reward_model(o.checkpoint, o.prompts, o.run.env, o.run.reward);
  std::vector<RlRunResult> results(o.seeds);
  parallel_for(o.seeds, g.jobs, [&](std::size_t i) {
    results[i] = train_rl(o.run, model ? &*model : nullptr, g.seed + i);
  });
  std::vector<std::string> outputs;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < o.seeds; ++i) {
    const std::uint64_t s = g.seed + i;
    seeds.push_back(s);
    const std::string name = "metrics_seed" + std::to_string(s) + ".tsv";
    curve_table(results[i].curve).write(out / name);
    outputs.push_back(name);
    if (o.save_policy) {
      const std::string pname = "policy_seed" + std::to_string(s) + ".json";
      write_json_file(out / pname, to_json(results[i].policy));
      outputs.push_back(pname);
    }
  }
  const json config{{"reward_source", reward_source_name(o.run.source)},
                    {"env", to_json(o.run.env)},
                    {"ppo", to_json(o.run.ppo)},
                    {"reward", to_json(o.run.reward)},
                    {"total_steps", o.run.total_steps},
                    {"eval_interval", o.run.eval_interval},
                    {"eval_episodes", o.run.eval_episodes}};
  write_json_file(out / "config.json", config);
  outputs.insert(outputs.begin(), "config.json");
  std::vector<std::string> inputs;
  if (!o.checkpoint.empty() && model) inputs.push_back(o.checkpoint);
  if (!o.prompts.empty() && model) inputs.push_back(o.prompts);
  finish(out, "rl train", config, seeds, inputs, outputs);
}

struct EvalOpts {
  std::string policy, out;
  bool scripted = false;
  std::size_t episodes = 50;
  HuntConfig env;
  bool no_flee = false;
};

void run_rl_eval(const Globals& g, EvalOpts o) {
  const fs::path out(o.out);
  o.env.flee = !o.no_flee;
  if (o.scripted == !o.policy.empty()) throw ConfigError("give exactly one of --policy or --scripted");
  double rate = 0.0;
  if (o.scripted) {
    const HuntConfig env = o.env;
    rate = evaluate_success([&env](const WorldState& s, const std::vector<double>&) {
      return scripted_chaser_action(env, s);
    }, o.env, o.episodes, g.seed);
  } else {
    const ActorCritic policy = policy_from_json(read_json_file(o.policy));
    if (policy.actor().input_dim() != FrameStack::input_dim(o.env))
      throw ConfigError("policy input size does not match the environment");
    rate = evaluate_success(greedy_policy(policy), o.env, o.episodes, g.seed);
  }
  Table t({"policy", "episodes", "success_rate"});
  t.row({o.scripted ? "scripted" : o.policy, Table::num(o.episodes), Table::num(rate)});
  t.write(out / "eval.tsv");
  const json config{{"env", to_json(o.env)}, {"episodes", o.episodes}, {"scripted", o.scripted}};
  finish(out, "rl eval", config, {g.seed}, o.scripted ? std::vector<std::string>{} : std::vector<std::string>{o.policy},
         {"eval.tsv"});
}

// ---------------------------------------------------------------------------
// analyze

struct SizeRewardOpts {
  std::string checkpoint, prompts, out;
  std::size_t steps = 5000;
  HuntConfig env;
  RewardConfig reward;
};

int run_size_reward(const Globals& g, const SizeRewardOpts& o) {
  const fs::path out(o.out);
  if (o.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const auto model = load_reward_model(o.checkpoint, o.prompts, o.env, o.reward);
  const auto a = analyze_size_reward(exploration_trajectory(o.env, *model, o.steps, g.seed));
  Table t({"step", "size", "f_size", "reward"});
  for (const auto& r : a.rows) t.row({Table::num(r.step), Table::num(r.size), Table::num(r.f_size), Table::num(r.reward)});
  t.write(out / "size_reward.tsv");
  Table s({"metric", "value"});
  s.row({"steps", Table::num(a.rows.size())});
  s.row({"pearson_r", a.pearson_r ? Table::num(*a.pearson_r) : "nan"});
  s.write(out / "summary.tsv");
  const json config{{"env", to_json(o.env)}, {"reward", to_json(o.reward)}, {"steps", o.steps}};
  std::vector<std::string> inputs{o.checkpoint};
  if (!o.prompts.empty()) inputs.push_back(o.prompts);
  finish(out, "analyze size-reward", config, {g.seed}, inputs, {"size_reward.tsv", "summary.tsv"});
  if (!a.pearson_r) {
    std::cerr << "analyze size-reward: correlation undefined: " << a.error << "\n";
    return kNumericalFailure;
  }
  std::cout << "pearson_r " << Table::num(*a.pearson_r) << "\n";
  return kOk;
}

struct RetrievalOpts {
  std::string checkpoint, data, out;
};

void run_retrieval(const Globals& g, const RetrievalOpts& o) {
  const fs::path out(o.out);
  const Checkpoint ck = read_checkpoint(o.checkpoint);
  const auto records = read_records(o.data);
  if (records.empty()) throw DataError("no records in '" + o.data + "'");
  const Matrix sim = similarity_matrix(ck.encoders, records);
  Table t({"k", "video_to_text", "text_to_video"});
  for (std::size_t k : {1, 5, 10}) {
    if (k > records.size()) continue;
    const RecallAtK r = retrieval_recall(sim, k);
    t.row({Table::num(k), Table::num(r.video_to_text), Table::num(r.text_to_video)});
  }
  t.write(out / "retrieval.tsv");
  finish(out, "analyze retrieval", {{"records", records.size()}}, {g.seed}, {o.checkpoint, o.data},
         {"retrieval.tsv"});
}

struct AblationOpts {
  std::vector<std::string> runs;
  std::string out;
};

void run_ablation(const Globals& g, const AblationOpts& o) {
  const fs::path out(o.out);
  std::vector<NamedCurve> curves;
  for (const auto& dir : o.runs) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw DataError("'" + dir + "' is not a run directory");
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("metrics_seed", 0) == 0 && e.path().extension() == ".tsv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("'" + dir + "' holds no metrics_seed*.tsv");
    for (const auto& f : files) curves.push_back({f.string(), read_curve(f)});
  }
  const AblationSummary s = compare_ablations(curves);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
  Table t({"step", "mean_success_rate", "standard_error", "n"});
  for (const auto& r : s.rows)
    t.row({Table::num(r.step), Table::num(r.mean), Table::num(r.standard_error), Table::num(r.n)});
  t.write(out / "ablation.tsv");
  finish(out, "analyze ablation", {{"runs", o.runs}}, {g.seed}, o.runs, {"ablation.tsv"});
}

void add_env_options(CLI::App* app, HuntConfig& env, bool& no_flee) {
  app->add_option("--grid-size", env.grid_size, "HuntGrid side length")->capture_default_str();
  app->add_option("--spawn-radius", env.spawn_radius, "Maximum target spawn distance")->capture_default_str();
  app->add_option("--max-steps", env.max_steps, "Episode step limit")->capture_default_str();
  app->add_option("--flee-prob", env.flee_prob, "Per-step flee probability after the first hit")->capture_default_str();
  app->add_flag("--no-flee", no_flee, "Disable fleeing");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rlvlm: curated video-text pairs, size-aware contrastive rewards and PPO on HuntGrid"};
  app.set_version_flag("--version", std::string(RLVLM_VERSION));
  app.set_config("--config", "", "INI/TOML file with option values; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();  // --seed and --jobs may follow the subcommand

  Globals g;
  app.add_option("--seed", g.seed, "Root seed (falls back to $RLVLM_SEED)")->envname("RLVLM_SEED");
  app.add_option("--jobs", g.jobs, "Worker cap")->check(CLI::PositiveNumber)->capture_default_str();

  int code = kOk;

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Corpus generation and filtering")->require_subcommand(1);
  GenerateOpts gen;
  auto* generate = pipeline->add_subcommand("generate", "Synthesize candidate clips, a test split and oracle labels");
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--misaligned", gen.corpus.misaligned_fraction, "Fraction of misaligned transcripts")->capture_default_str();
  generate->add_option("--candidates", gen.corpus.pipeline.candidate_count, "Candidate records (M)")->capture_default_str();
  generate->add_option("--test-count", gen.corpus.pipeline.test_count, "Test records (M')")->capture_default_str();
  generate->add_option("--frame-noise", gen.corpus.frame_noise, "Frame feature noise std")->capture_default_str();
  generate->add_option("--heatmap-noise", gen.corpus.heatmap_noise, "Patch score noise std")->capture_default_str();
  generate->add_option("--clip-duration", gen.corpus.pipeline.clip_duration, "Clip window D in seconds")->capture_default_str();
  generate->add_option("--partitions", gen.corpus.pipeline.partitions, "Segments per clip (p)")->capture_default_str();
  generate->add_option("--tau-patch", gen.corpus.pipeline.tau_patch, "Patch threshold")->capture_default_str();
  generate->callback([&] { run_generate(g, gen); });

  FilterOpts filt;
  auto* filter = pipeline->add_subcommand("filter", "Two-level correlation filtering of candidates");
  filter->add_option("--in", filt.in, "Directory written by 'pipeline generate'")->required();
  filter->add_option("--out", filt.out, "Output directory")->required();
  filter->add_option("--k", filt.k_percent, "Percentage of candidates to keep")->capture_default_str();
  filter->callback([&] { run_filter(g, filt); });

  StatsOpts st;
  auto* stats = pipeline->add_subcommand("stats", "Summary table for a record file");
  stats->add_option("--records", st.records, "Records (.jsonl)")->required();
  stats->add_option("--oracle", st.oracle, "Oracle labels (.jsonl) for precision");
  stats->add_option("--out", st.out, "Output directory")->required();
  stats->callback([&] { run_stats(g, st); });

  // train
  auto* train_cmd = app.add_subcommand("train", "Model training")->require_subcommand(1);
  TrainOpts tr;
  auto* contrastive = train_cmd->add_subcommand("contrastive", "Train the dual encoder");
  contrastive->add_option("--train", tr.train, "Training records (.jsonl)")->required();
  contrastive->add_option("--valid", tr.valid, "Validation records (.jsonl)");
  contrastive->add_option("--out", tr.out, "Output directory")->required();
  contrastive->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  contrastive->add_option("--steps-per-epoch", tr.cfg.steps_per_epoch)->capture_default_str();
  contrastive->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
  contrastive->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  contrastive->add_option("--warmup", tr.cfg.warmup_steps)->capture_default_str();
  contrastive->add_option("--temperature", tr.cfg.temperature)->capture_default_str();
  contrastive->add_option("--weight-decay", tr.cfg.weight_decay)->capture_default_str();
  contrastive->add_option("--p-max", tr.swap.p_max, "Swap probability cap")->capture_default_str();
  contrastive->add_option("--tau", tr.swap.tau, "Swap size threshold")->capture_default_str();
  contrastive->add_flag("--no-swap", tr.no_swap, "Disable the size-conditioned swap");
  contrastive->callback([&] { run_train(g, tr); });

  // rl
  auto* rl = app.add_subcommand("rl", "HuntGrid reinforcement learning")->require_subcommand(1);
  RlOpts ro;
  auto* rl_train = rl->add_subcommand("train", "PPO with sparse or shaped reward");
  rl_train->add_option("--reward", ro.reward, "sparse | mineclip | clip4mc")
      ->check(CLI::IsMember({"sparse", "mineclip", "clip4mc"}))->capture_default_str();
  rl_train->add_option("--checkpoint", ro.checkpoint, "Encoder checkpoint for shaped rewards");
  rl_train->add_option("--prompts", ro.prompts, "Prompt set (.json); built from the checkpoint otherwise");
  rl_train->add_option("--seeds", ro.seeds, "Number of seeds, starting at --seed")->capture_default_str();
  rl_train->add_option("--steps", ro.run.total_steps, "Environment steps per seed")->capture_default_str();
  rl_train->add_option("--eval-interval", ro.run.eval_interval)->capture_default_str();
  rl_train->add_option("--eval-episodes", ro.run.eval_episodes)->capture_default_str();
  rl_train->add_option("--mix", ro.run.reward.mix, "c in r_env + c * r_mc")->capture_default_str();
  rl_train->add_option("--reward-temperature", ro.run.reward.temperature)->capture_default_str();
  rl_train->add_option("--lr", ro.run.ppo.learning_rate)->capture_default_str();
  rl_train->add_option("--clip", ro.run.ppo.clip_epsilon)->capture_default_str();
  rl_train->add_option("--entropy", ro.run.ppo.entropy_coef)->capture_default_str();
  rl_train->add_option("--gamma", ro.run.ppo.gamma)->capture_default_str();
  rl_train->add_option("--gae-lambda", ro.run.ppo.gae_lambda)->capture_default_str();
  rl_train->add_option("--ppo-epochs", ro.run.ppo.epochs)->capture_default_str();
  rl_train->add_option("--minibatches", ro.run.ppo.minibatches)->capture_default_str();
  rl_train->add_option("--rollout", ro.run.ppo.steps, "Steps per env per rollout")->capture_default_str();
  rl_train->add_option("--envs", ro.run.ppo.envs)->capture_default_str();
  rl_train->add_flag("--save-policy", ro.save_policy, "Write the final policy per seed");
  rl_train->add_option("--out", ro.out, "Output directory")->required();
  add_env_options(rl_train, ro.run.env, ro.no_flee);
  rl_train->callback([&] { run_rl_train(g, ro); });

  EvalOpts eo;
  auto* rl_eval = rl->add_subcommand("eval", "Greedy success rate of a saved or scripted policy");
  rl_eval->add_option("--policy", eo.policy, "Policy file from 'rl train --save-policy'");
  rl_eval->add_flag("--scripted", eo.scripted, "Evaluate the scripted chaser");
  rl_eval->add_option("--episodes", eo.episodes)->check(CLI::PositiveNumber)->capture_default_str();
  rl_eval->add_option("--out", eo.out, "Output directory")->required();
  add_env_options(rl_eval, eo.env, eo.no_flee);
  rl_eval->callback([&] { run_rl_eval(g, eo); });

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Analyses")->require_subcommand(1);
  SizeRewardOpts so;
  auto* size_reward = analyze->add_subcommand("size-reward", "Pearson r of ln(size + e^-2) against intrinsic reward");
  size_reward->add_option("--checkpoint", so.checkpoint, "Encoder checkpoint")->required();
  size_reward->add_option("--prompts", so.prompts, "Prompt set (.json)");
  size_reward->add_option("--steps", so.steps)->capture_default_str();
  size_reward->add_option("--out", so.out, "Output directory")->required();
  size_reward->callback([&] { code = run_size_reward(g, so); });

  RetrievalOpts rto;
  auto* retrieval = analyze->add_subcommand("retrieval", "R@1/5/10 on held-out pairs");
  retrieval->add_option("--checkpoint", rto.checkpoint, "Encoder checkpoint")->required();
  retrieval->add_option("--data", rto.data, "Records (.jsonl)")->required();
  retrieval->add_option("--out", rto.out, "Output directory")->required();
  retrieval->callback([&] { run_retrieval(g, rto); });

  AblationOpts ao;
  auto* ablation = analyze->add_subcommand("ablation", "Mean and standard error of success across runs");
  ablation->add_option("--runs", ao.runs, "Run directories from 'rl train'")->required()->expected(1, -1);
  ablation->add_option("--out", ao.out, "Output directory")->required();
  ablation->callback([&] { run_ablation(g, ao); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigFailure;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const DomainError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataFailure;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataFailure;
  }
  return code;
}
