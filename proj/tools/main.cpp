// Command-line front end: generate toy models and corpora, run the
// rotate/scale/quantize pipeline, evaluate, and reproduce the ablation
// experiments. Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "rsq/data.hpp"
#include "rsq/eval.hpp"
#include "rsq/log.hpp"
#include "rsq/model.hpp"
#include "rsq/model_io.hpp"
#include "rsq/pipeline.hpp"
#include "rsq/report.hpp"
#include "rsq/rng.hpp"
#include "rsq/version.hpp"

namespace {

struct PlanArgs {
  int bits = 3;
  int group_size = 0;
  double damp = 0.01;
  std::string strategy = "attn-con";
  int n = 0;
  double r_min = 0.01;
  int expansion = 8;
  bool subsample = false;
  bool no_rotate = false;
  bool keep_embeddings = false;
  std::uint64_t seed = 0;
  std::string weight_strategy;
  std::string config_path;
};

void add_plan_flags(CLI::App* cmd, PlanArgs& args) {
  cmd->add_option("--bits", args.bits, "Quantization bit width")
      ->check(CLI::IsMember({2, 3, 4, 8}))
      ->capture_default_str();
  cmd->add_option("--group-size", args.group_size, "Columns per quantization group (0 = whole row)")
      ->capture_default_str();
  cmd->add_option("--damp", args.damp, "Hessian dampening factor")->capture_default_str();
  cmd->add_option("--strategy", args.strategy, "Token importance strategy")
      ->check(CLI::IsMember({"uniform", "first-n", "first-last-n", "token-freq", "act-norm", "act-diff",
                             "token-sim", "attn-con"}))
      ->capture_default_str();
  cmd->add_option("--n", args.n, "N for first-n / first-last-n (0 = full length)")->capture_default_str();
  cmd->add_option("--r-min", args.r_min, "Lower bound of the importance range map")->capture_default_str();
  cmd->add_option("--expansion", args.expansion, "Calibration dataset expansion factor")
      ->capture_default_str();
  cmd->add_flag("--subsample", args.subsample,
                "Subsample the expanded dataset back to the original token budget");
  cmd->add_flag("--no-rotate", args.no_rotate, "Skip the Hadamard rotation (scale-then-quantize mode)");
  cmd->add_flag("--keep-embeddings", args.keep_embeddings,
                "Leave the embedding and lm_head in full precision");
  cmd->add_option("--seed", args.seed, "Root seed for the run")->capture_default_str();
  cmd->add_option("--weight-strategy", args.weight_strategy,
                  "Per-weight strategy override, e.g. wv=attn-con,wq=uniform");
  cmd->add_option("--config", args.config_path, "Flat key=value config file (flags override it)");
}

rsq::QuantPlan build_plan(const CLI::App* cmd, const PlanArgs& args) {
  rsq::QuantPlan plan;
  if (!args.config_path.empty()) {
    std::ifstream is(args.config_path);
    if (!is) throw std::runtime_error("cannot open config: " + args.config_path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    plan = rsq::plan_from_kv(rsq::parse_flat_kv(text), plan);
  }
  auto given = [&](const std::string& flag) { return cmd->count(flag) > 0; };
  if (given("--bits")) plan.bits = args.bits;
  if (given("--group-size")) plan.group_size = args.group_size;
  if (given("--damp")) plan.damp_lambda = args.damp;
  if (given("--strategy")) plan.strategy = rsq::parse_strategy(args.strategy);
  if (given("--n")) plan.strategy_n = args.n;
  if (given("--r-min")) plan.r_min = args.r_min;
  if (given("--expansion")) plan.expansion = args.expansion;
  if (given("--subsample")) plan.subsample = args.subsample;
  if (given("--no-rotate")) plan.rotate = !args.no_rotate;
  if (given("--keep-embeddings")) plan.quantize_embeddings = !args.keep_embeddings;
  if (given("--seed")) plan.seed = args.seed;
  if (given("--weight-strategy")) {
    plan.per_weight.clear();
    std::map<std::string, std::string> kv;
    kv["weight_strategy"] = args.weight_strategy;
    plan = rsq::plan_from_kv(kv, plan);
  }
  plan.validate();
  return plan;
}

std::vector<std::uint64_t> seed_list(std::uint64_t root, int k) {
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < k; ++i) seeds.push_back(root + static_cast<std::uint64_t>(i));
  return seeds;
}

rsq::EvalSettings make_eval_settings(const std::string& eval_data_path, int context_len, int pairs,
                                     int prompts, std::uint64_t seed, const rsq::ModelContainer& model,
                                     int calib_len, int eval_samples) {
  rsq::EvalSettings eval;
  if (!eval_data_path.empty()) {
    eval.corpus = rsq::read_token_file(eval_data_path);
  } else {
    // Held out by construction: the eval stage of the seed split is disjoint
    // from the calibration stage.
    eval.corpus = rsq::gen_corpus(model.arch.vocab, eval_samples, calib_len,
                                  rsq::derive_seed(seed, rsq::SeedStage::eval_corpus));
    rsq::log_info("generated ", eval_samples, " held-out eval sequences of length ", calib_len);
  }
  // Perplexity is context-length sensitive; default to the calibration length.
  eval.context_len = context_len > 0 ? context_len : calib_len;
  eval.retrieval_pairs = pairs;
  eval.retrieval_prompts = prompts;
  return eval;
}

void print_table(const rsq::FlatTable& table) { std::cout << table.to_csv(); }

int run(int argc, char** argv) {
  CLI::App app{"Layer-wise weight quantization on a toy decoder transformer: "
               "rotate, scale by token importance, then quantize."};
  app.set_version_flag("--version", std::string(rsq::kVersion));
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("--verbose", verbose, "Debug-level logging on stderr");

  // gen-model ---------------------------------------------------------------
  auto* gen_model = app.add_subcommand("gen-model", "Generate a seeded toy transformer container");
  std::string gm_out;
  std::uint64_t gm_seed = 0;
  int gm_layers = 4, gm_d_model = 64, gm_heads = 4, gm_d_ff = 128, gm_vocab = 256, gm_max_seq = 256;
  std::string gm_dtype = "f32";
  gen_model->add_option("--out", gm_out, "Output model path")->required();
  gen_model->add_option("--seed", gm_seed, "Root seed")->capture_default_str();
  gen_model->add_option("--layers", gm_layers, "Number of transformer blocks")->capture_default_str();
  gen_model->add_option("--d-model", gm_d_model, "Residual width (power of two)")->capture_default_str();
  gen_model->add_option("--heads", gm_heads, "Attention heads")->capture_default_str();
  gen_model->add_option("--d-ff", gm_d_ff, "FFN width (power of two)")->capture_default_str();
  gen_model->add_option("--vocab", gm_vocab, "Vocabulary size")->capture_default_str();
  gen_model->add_option("--max-seq", gm_max_seq, "Maximum sequence length")->capture_default_str();
  gen_model->add_option("--dtype", gm_dtype, "Tensor storage dtype")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();

  // gen-data ----------------------------------------------------------------
  auto* gen_data = app.add_subcommand("gen-data", "Generate a seeded synthetic token corpus");
  std::string gd_out, gd_role = "calib";
  std::uint64_t gd_seed = 0;
  int gd_vocab = 256, gd_samples = 32, gd_seq_len = 128;
  gen_data->add_option("--out", gd_out, "Output token file")->required();
  gen_data->add_option("--seed", gd_seed, "Root seed")->capture_default_str();
  gen_data->add_option("--vocab", gd_vocab, "Vocabulary size")->capture_default_str();
  gen_data->add_option("--samples", gd_samples, "Number of sequences")->capture_default_str();
  gen_data->add_option("--seq-len", gd_seq_len, "Tokens per sequence")->capture_default_str();
  gen_data->add_option("--role", gd_role, "Seed stage: calibration or held-out eval corpus")
      ->check(CLI::IsMember({"calib", "eval"}))
      ->capture_default_str();

  // tokenize ----------------------------------------------------------------
  auto* tokenize = app.add_subcommand("tokenize", "Byte-level tokenize a text file into a token file");
  std::string tk_in, tk_out;
  int tk_seq_len = 128;
  tokenize->add_option("--in", tk_in, "Input text file")->required();
  tokenize->add_option("--out", tk_out, "Output token file")->required();
  tokenize->add_option("--seq-len", tk_seq_len, "Tokens per sample (remainder dropped)")
      ->capture_default_str();

  // quantize ----------------------------------------------------------------
  auto* quantize = app.add_subcommand("quantize", "Quantize a model with the rotate/scale/quantize pipeline");
  std::string qz_model, qz_data, qz_out, qz_report, qz_eval_data;
  int qz_context = 0, qz_pairs = 8, qz_prompts = 128, qz_eval_samples = 16;
  bool qz_no_eval = false, qz_no_timing = false;
  PlanArgs qz_plan;
  quantize->add_option("--model", qz_model, "Full-precision model container")->required();
  quantize->add_option("--data", qz_data, "Calibration token file")->required();
  quantize->add_option("--out", qz_out, "Output quantized container")->required();
  quantize->add_option("--report", qz_report, "Run report path");
  quantize->add_option("--eval-data", qz_eval_data, "Held-out eval token file (default: derived seed)");
  quantize->add_option("--context-len", qz_context, "Eval context length (0 = calibration length)")
      ->capture_default_str();
  quantize->add_option("--pairs", qz_pairs, "Key-value pairs per retrieval prompt")->capture_default_str();
  quantize->add_option("--prompts", qz_prompts, "Retrieval prompts")->capture_default_str();
  quantize->add_option("--eval-samples", qz_eval_samples, "Held-out sequences when auto-generating")
      ->capture_default_str();
  quantize->add_flag("--no-eval", qz_no_eval, "Skip perplexity/retrieval evaluation");
  quantize->add_flag("--no-timing", qz_no_timing, "Omit wall-clock timing from the report");
  add_plan_flags(quantize, qz_plan);

  // eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model container on a token corpus");
  std::string ev_model, ev_data, ev_report;
  int ev_context = 0, ev_pairs = 8, ev_prompts = 128;
  std::uint64_t ev_seed = 0;
  eval_cmd->add_option("--model", ev_model, "Model container")->required();
  eval_cmd->add_option("--data", ev_data, "Eval token file")->required();
  eval_cmd->add_option("--report", ev_report, "Optional flat key=value output file");
  eval_cmd->add_option("--context-len", ev_context, "Context length (0 = sequence length)")
      ->capture_default_str();
  eval_cmd->add_option("--pairs", ev_pairs, "Key-value pairs per retrieval prompt")->capture_default_str();
  eval_cmd->add_option("--prompts", ev_prompts, "Retrieval prompts")->capture_default_str();
  eval_cmd->add_option("--seed", ev_seed, "Retrieval prompt seed")->capture_default_str();

  // chunk-ablation ------------------------------------------------------
  auto* chunk = app.add_subcommand("chunk-ablation", "Quantize with per-chunk losses and tabulate");
  std::string ck_model, ck_data, ck_out, ck_eval_data;
  int ck_chunks = 4, ck_seeds = 1, ck_context = 0, ck_eval_samples = 16;
  PlanArgs ck_plan;
  chunk->add_option("--model", ck_model, "Full-precision model container")->required();
  chunk->add_option("--data", ck_data, "Calibration token file")->required();
  chunk->add_option("--out", ck_out, "Output CSV table");
  chunk->add_option("--chunks", ck_chunks, "Number of non-overlapping chunks")->capture_default_str();
  chunk->add_option("--seeds", ck_seeds, "Repeat with this many seeds; report mean and std")
      ->capture_default_str();
  chunk->add_option("--eval-data", ck_eval_data, "Held-out eval token file (default: derived seed)");
  chunk->add_option("--context-len", ck_context, "Eval context length (0 = calibration length)")
      ->capture_default_str();
  chunk->add_option("--eval-samples", ck_eval_samples, "Held-out sequences when auto-generating")
      ->capture_default_str();
  add_plan_flags(chunk, ck_plan);

  // sweep ----------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one hyperparameter axis and tabulate");
  std::string sw_model, sw_data, sw_out, sw_eval_data, sw_axis = "r_min", sw_values = "0.005,0.01,0.02,0.05,0.1";
  int sw_seeds = 1, sw_context = 0, sw_eval_samples = 16;
  PlanArgs sw_plan;
  sweep_cmd->add_option("--model", sw_model, "Full-precision model container")->required();
  sweep_cmd->add_option("--data", sw_data, "Calibration token file")->required();
  sweep_cmd->add_option("--out", sw_out, "Output CSV table");
  sweep_cmd->add_option("--axis", sw_axis, "Axis: n | r_min | expansion")->capture_default_str();
  sweep_cmd->add_option("--values", sw_values, "Comma-separated axis values")->capture_default_str();
  sweep_cmd->add_option("--seeds", sw_seeds, "Repeat with this many seeds; report mean and std")
      ->capture_default_str();
  sweep_cmd->add_option("--eval-data", sw_eval_data, "Held-out eval token file (default: derived seed)");
  sweep_cmd->add_option("--context-len", sw_context, "Eval context length (0 = calibration length)")
      ->capture_default_str();
  sweep_cmd->add_option("--eval-samples", sw_eval_samples, "Held-out sequences when auto-generating")
      ->capture_default_str();
  add_plan_flags(sweep_cmd, sw_plan);

  // compare ----------------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "Uniform baseline vs chosen strategy with shared seeds");
  std::string cp_model, cp_data, cp_out, cp_eval_data;
  int cp_seeds = 1, cp_context = 0, cp_eval_samples = 16, cp_pairs = 8, cp_prompts = 128;
  PlanArgs cp_plan;
  compare->add_option("--model", cp_model, "Full-precision model container")->required();
  compare->add_option("--data", cp_data, "Calibration token file")->required();
  compare->add_option("--out", cp_out, "Output CSV table");
  compare->add_option("--seeds", cp_seeds, "Repeat with this many seeds; report mean and std")
      ->capture_default_str();
  compare->add_option("--eval-data", cp_eval_data, "Held-out eval token file (default: derived seed)");
  compare->add_option("--context-len", cp_context, "Eval context length (0 = calibration length)")
      ->capture_default_str();
  compare->add_option("--eval-samples", cp_eval_samples, "Held-out sequences when auto-generating")
      ->capture_default_str();
  compare->add_option("--pairs", cp_pairs, "Key-value pairs per retrieval prompt")->capture_default_str();
  compare->add_option("--prompts", cp_prompts, "Retrieval prompts")->capture_default_str();
  add_plan_flags(compare, cp_plan);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << rsq::kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }
  rsq::set_log_level(verbose ? rsq::LogLevel::debug : rsq::LogLevel::info);

  if (gen_model->parsed()) {
    rsq::ModelArch arch{gm_layers, gm_d_model, gm_heads, gm_d_ff, gm_vocab, gm_max_seq};
    const auto dtype = gm_dtype == "f32" ? rsq::Dtype::f32 : rsq::Dtype::f64;
    const rsq::ModelContainer model = rsq::generate_model(arch, gm_seed, dtype);
    rsq::write_model(model, gm_out);
    rsq::log_info("wrote model to ", gm_out);
    return 0;
  }

  if (gen_data->parsed()) {
    const auto stage = gd_role == "calib" ? rsq::SeedStage::corpus : rsq::SeedStage::eval_corpus;
    const auto corpus = rsq::gen_corpus(gd_vocab, gd_samples, gd_seq_len, rsq::derive_seed(gd_seed, stage));
    rsq::write_token_file(gd_out, corpus);
    rsq::log_info("wrote ", gd_samples, " sequences to ", gd_out);
    return 0;
  }

  if (tokenize->parsed()) {
    std::ifstream is(tk_in, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + tk_in);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const rsq::TokenSeq ids = rsq::tokenize_bytes(text);
    if (static_cast<int>(ids.size()) < tk_seq_len) {
      throw std::runtime_error("input shorter than one sample of " + std::to_string(tk_seq_len) + " tokens");
    }
    std::vector<rsq::TokenSeq> samples;
    for (std::size_t begin = 0; begin + tk_seq_len <= ids.size(); begin += tk_seq_len) {
      samples.emplace_back(ids.begin() + begin, ids.begin() + begin + tk_seq_len);
    }
    rsq::write_token_file(tk_out, samples);
    rsq::log_info("wrote ", samples.size(), " samples of length ", tk_seq_len, " to ", tk_out);
    return 0;
  }

  if (quantize->parsed()) {
    const rsq::ModelContainer model = rsq::read_model(qz_model);
    const auto calib = rsq::read_token_file(qz_data);
    const rsq::QuantPlan plan = build_plan(quantize, qz_plan);
    auto out = rsq::quantize_model(model, calib, plan);
    if (!qz_no_eval) {
      const auto eval = make_eval_settings(qz_eval_data, qz_context, qz_pairs, qz_prompts, plan.seed, model,
                                           static_cast<int>(calib.front().size()), qz_eval_samples);
      rsq::evaluate_into_report(out.report, out.model, &model, eval);
      rsq::log_info("perplexity=", rsq::format_float(out.report.perplexity.value_or(0.0)),
                    " retrieval=", rsq::format_float(out.report.retrieval_accuracy.value_or(0.0)));
    }
    rsq::write_model(out.model, qz_out);
    rsq::log_info("wrote quantized model to ", qz_out);
    if (!qz_report.empty()) {
      rsq::emit_report(out.report, qz_report, !qz_no_timing);
      rsq::log_info("wrote report to ", qz_report);
    } else {
      std::cout << rsq::emit_report_text(out.report, !qz_no_timing);
    }
    return 0;
  }

  if (eval_cmd->parsed()) {
    const rsq::ModelContainer model = rsq::read_model(ev_model);
    const auto corpus = rsq::read_token_file(ev_data);
    const int ctx = ev_context > 0 ? ev_context : static_cast<int>(corpus.front().size());
    const double ppl = rsq::perplexity(model, corpus, ctx);
    const double acc = rsq::retrieval_accuracy(model, ev_pairs, ev_seed, ev_prompts);
    std::string text = "eval.context_len=" + std::to_string(ctx) + "\n";
    text += "eval.perplexity=" + rsq::format_float(ppl) + "\n";
    text += "eval.retrieval_accuracy=" + rsq::format_float(acc) + "\n";
    std::cout << text;
    if (!ev_report.empty()) {
      std::ofstream os(ev_report, std::ios::binary);
      if (!os) throw std::runtime_error("cannot open for write: " + ev_report);
      os << text;
    }
    return 0;
  }

  if (chunk->parsed()) {
    const rsq::ModelContainer model = rsq::read_model(ck_model);
    const auto calib = rsq::read_token_file(ck_data);
    const rsq::QuantPlan plan = build_plan(chunk, ck_plan);
    const auto eval = make_eval_settings(ck_eval_data, ck_context, 8, 128, plan.seed, model,
                                         static_cast<int>(calib.front().size()), ck_eval_samples);
    const auto table = rsq::chunk_ablation(model, calib, plan, ck_chunks, eval, seed_list(plan.seed, ck_seeds));
    print_table(table);
    if (!ck_out.empty()) table.write_csv(ck_out);
    return 0;
  }

  if (sweep_cmd->parsed()) {
    const rsq::ModelContainer model = rsq::read_model(sw_model);
    const auto calib = rsq::read_token_file(sw_data);
    const rsq::QuantPlan plan = build_plan(sweep_cmd, sw_plan);
    const auto eval = make_eval_settings(sw_eval_data, sw_context, 8, 128, plan.seed, model,
                                         static_cast<int>(calib.front().size()), sw_eval_samples);
    std::vector<double> values;
    std::stringstream ss(sw_values);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) values.push_back(std::stod(item));
    }
    const auto table = rsq::sweep(model, calib, plan, rsq::parse_sweep_axis(sw_axis), values, eval,
                                  seed_list(plan.seed, sw_seeds));
    print_table(table);
    if (!sw_out.empty()) table.write_csv(sw_out);
    return 0;
  }

  if (compare->parsed()) {
    const rsq::ModelContainer model = rsq::read_model(cp_model);
    const auto calib = rsq::read_token_file(cp_data);
    const rsq::QuantPlan plan = build_plan(compare, cp_plan);
    auto eval = make_eval_settings(cp_eval_data, cp_context, cp_pairs, cp_prompts, plan.seed, model,
                                   static_cast<int>(calib.front().size()), cp_eval_samples);
    const auto table = rsq::compare_strategies(model, calib, plan, eval, seed_list(plan.seed, cp_seeds));
    print_table(table);
    if (!cp_out.empty()) table.write_csv(cp_out);
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    rsq::log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    rsq::log_error(e.what());
    return 2;
  }
}
