/*
 * Copyright 2026 The TDNR Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line entry point.
//
//   synth    generate a synthetic corpus into --out DIR
//   prepare  parse and validate data, build the vocabulary
//   train    train on --behaviors, then write --checkpoint plus the epoch log
//   eval     score --behaviors with a checkpoint
//   ablate   train and evaluate all four variants on a held-out split
//   rank     rank one impression's candidates with optional flags
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
// Every failure prints one line to stderr:
//   error exit=<code> kind=<kind> reason=<text>

#ifndef TDNR_CLI_HPP_
#define TDNR_CLI_HPP_

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "tdnr/data/synthetic.hpp"
#include "tdnr/errors.hpp"
#include "tdnr/eval/evaluate.hpp"
#include "tdnr/training/checkpoint.hpp"
#include "tdnr/training/config.hpp"
#include "tdnr/training/trainer.hpp"

namespace tdnr {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

namespace cli_detail {

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error("usage", what) {}
};

struct Invocation {
  std::string news, behaviors, config, checkpoint, out, detail, impression;
  std::vector<std::string> flags;
  // Key overrides in command-line key order.
  std::vector<std::pair<std::string, std::string>> overrides;
};

inline std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

inline void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required flag ") + flag);
}

inline std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(std::string("cannot open ") + what + " '" + path + "'");
  return in;
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write '" + path + "'");
  out << text;
  if (!out) throw LoadError("failed writing '" + path + "'");
}

template <typename Settings>
void resolve(Settings& settings, const Invocation& inv) {
  if (!inv.config.empty()) {
    for (const auto& [k, v] : read_key_value_file(inv.config)) settings.set(k, v);
  }
  for (const auto& [k, v] : inv.overrides) settings.set(k, v);
}

template <typename Settings>
void print_resolved(std::ostream& out, const Settings& settings) {
  out << "# resolved config\n";
  for (const auto& [k, v] : settings.entries()) out << k << '=' << v << '\n';
}

// Registers --<key> for every key of `Settings`, plus hyphenated aliases.
template <typename Settings>
void add_key_flags(CLI::App* cmd, Invocation& inv) {
  Settings probe;
  for (const auto& [key, value] : probe.entries()) {
    std::string names = "--" + key;
    std::string hyphen = key;
    for (char& c : hyphen) {
      if (c == '_') c = '-';
    }
    if (hyphen != key) names += ",--" + hyphen;
    const std::string k = key;
    cmd->add_option_function<std::string>(
           names, [&inv, k](const std::string& v) { inv.overrides.emplace_back(k, v); },
           "override config key " + key + " (default " + value + ")")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

inline TrainConfig resolve_train(const Invocation& inv, std::ostream& out) {
  TrainConfig cfg;
  resolve(cfg, inv);
  cfg.validate();
  print_resolved(out, cfg);
  return cfg;
}

inline Dataset read_dataset(const Invocation& inv, const TrainConfig& cfg,
                            const Vocabulary* vocab = nullptr) {
  require(inv.news, "--news");
  require(inv.behaviors, "--behaviors");
  auto news = open_input(inv.news, "news table");
  auto behaviors = open_input(inv.behaviors, "behaviors table");
  return load_dataset(news, behaviors, cfg, vocab);
}

// Writes to --out when given, stdout otherwise.
inline void emit(const Invocation& inv, const std::string& text, std::ostream& out) {
  if (inv.out.empty()) out << text;
  else write_file(inv.out, text);
}

inline int run_synth(const Invocation& inv, std::ostream& out) {
  SyntheticSettings settings;
  resolve(settings, inv);
  settings.cfg.validate();
  print_resolved(out, settings);
  require(inv.out, "--out");
  const SyntheticCorpus corpus = generate_synthetic_corpus(settings.cfg);
  std::filesystem::create_directories(inv.out);
  const std::filesystem::path dir(inv.out);
  write_file((dir / "news.tsv").string(), corpus.news_tsv);
  write_file((dir / "behaviors.tsv").string(), corpus.behaviors_tsv);
  write_file((dir / "provenance.txt").string(), corpus.provenance);
  out << "wrote " << dir.string() << " news=" << settings.cfg.n_news
      << " clickbait=" << corpus.clickbait_ids.size() << '\n';
  return kExitOk;
}

inline int run_prepare(const Invocation& inv, std::ostream& out) {
  const TrainConfig cfg = resolve_train(inv, out);
  const Dataset ds = read_dataset(inv, cfg);
  std::size_t positives = 0, scoreable = 0;
  for (const auto& imp : ds.impressions) {
    positives += imp.positives();
    scoreable += (imp.positives() > 0 && imp.negatives() > 0) ? 1 : 0;
  }
  out << "news=" << ds.corpus.size() << " impressions=" << ds.impressions.size()
      << " scoreable=" << scoreable << " positives=" << positives
      << " vocab=" << ds.vocab.size() << '\n';
  if (!inv.out.empty()) {
    std::string text;
    for (std::int32_t id = 0; id < static_cast<std::int32_t>(ds.vocab.size()); ++id) {
      text += ds.vocab.token(id) + '\n';
    }
    write_file(inv.out, text);
  }
  return kExitOk;
}

inline int run_train(const Invocation& inv, std::ostream& out) {
  const TrainConfig cfg = resolve_train(inv, out);
  require(inv.checkpoint, "--checkpoint");
  const Dataset ds = read_dataset(inv, cfg);
  TrainResult<float> result = train<float>(cfg, ds.corpus, ds.vocab.size(), ds.impressions);
  save_checkpoint({cfg, ds.vocab, std::move(result.state)}, inv.checkpoint);
  std::ostringstream log;
  write_training_log(log, result.log);
  emit(inv, log.str(), out);
  return kExitOk;
}

inline Checkpoint load_for_inference(const Invocation& inv, std::ostream& out) {
  require(inv.checkpoint, "--checkpoint");
  Checkpoint ckpt = load_checkpoint(inv.checkpoint);
  // Keys given on the command line must agree with the trained model.
  TrainConfig requested = ckpt.config;
  resolve(requested, inv);
  if (requested.variant != ckpt.config.variant) {
    throw UsageError(std::string("checkpoint was trained as ") + variant_name(ckpt.config.variant) +
                     ", not " + variant_name(requested.variant));
  }
  print_resolved(out, ckpt.config);
  return ckpt;
}

inline int run_eval(const Invocation& inv, std::ostream& out) {
  Checkpoint ckpt = load_for_inference(inv, out);
  const Dataset ds = read_dataset(inv, ckpt.config, &ckpt.vocab);
  const MetricsReport report = evaluate(ckpt.state.params, ds.corpus, ds.impressions);
  std::ostringstream csv;
  write_report_header(csv);
  write_report_row(csv, report);
  emit(inv, csv.str(), out);
  if (!inv.detail.empty()) {
    std::ostringstream detail;
    write_report_detail(detail, report);
    write_file(inv.detail, detail.str());
  }
  return kExitOk;
}

inline int run_ablate(const Invocation& inv, std::ostream& out) {
  const TrainConfig cfg = resolve_train(inv, out);
  const Dataset ds = read_dataset(inv, cfg);
  std::ostringstream csv;
  write_report_header(csv);
  for (Variant v : kAllVariants) {
    const AblationResult<float> r = run_ablation<float>(v, cfg, ds);
    write_report_row(csv, r.report);
  }
  emit(inv, csv.str(), out);
  return kExitOk;
}

inline int run_rank(const Invocation& inv, std::ostream& out) {
  require(inv.impression, "--impression");
  std::map<std::string, std::string> flags;
  for (const auto& f : inv.flags) {
    const auto eq = f.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--flag expects NEWSID=clicked|clickbait, got '" + f + "'");
    }
    try {
      flags[f.substr(0, eq)] = parse_flag_value(f.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  Checkpoint ckpt = load_for_inference(inv, out);
  const Dataset ds = read_dataset(inv, ckpt.config, &ckpt.vocab);
  const ImpressionLog* target = nullptr;
  for (const auto& imp : ds.impressions) {
    if (imp.impression_id == inv.impression) target = &imp;
  }
  if (!target) throw ContractError("impression '" + inv.impression + "' not found");
  const auto rows = inspect_ranking(ckpt.state.params, ds.corpus, *target, flags);
  std::ostringstream csv;
  write_ranking(csv, rows);
  emit(inv, csv.str(), out);
  return kExitOk;
}

inline int exit_code_for(const Error& e) {
  const std::string& kind = e.kind();
  if (kind == "usage" || kind == "config") return kExitUsage;
  if (kind == "numeric") return kExitNumeric;
  return kExitData;
}

inline void report_error(std::ostream& err, int code, const std::string& kind,
                         const std::string& reason) {
  err << "error exit=" << code << " kind=" << kind << " reason=" << one_line(reason) << '\n';
}

}  // namespace cli_detail

// Runs one subcommand and returns its exit code.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Title-debiasing news recommender"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "expand all help");

  Invocation inv;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Invocation&, std::ostream&);
  };
  const Command commands[] = {
      {"synth", "generate a synthetic clickbait corpus", run_synth},
      {"prepare", "build the vocabulary and validate data", run_prepare},
      {"train", "train and write a checkpoint", run_train},
      {"eval", "evaluate a checkpoint", run_eval},
      {"ablate", "train and evaluate all four variants", run_ablate},
      {"rank", "rank one impression's candidates", run_rank},
  };
  std::map<CLI::App*, const Command*> by_app;
  for (const auto& c : commands) {
    CLI::App* cmd = app.add_subcommand(c.name, c.help);
    by_app[cmd] = &c;
    cmd->add_option("--news", inv.news, "news table (TSV)");
    cmd->add_option("--behaviors", inv.behaviors, "behaviors table (TSV)");
    cmd->add_option("--config", inv.config, "key=value config file");
    cmd->add_option("--checkpoint", inv.checkpoint, "checkpoint path");
    cmd->add_option("--out", inv.out, "output path");
    cmd->add_option("--detail", inv.detail, "per-impression detail CSV (eval)");
    cmd->add_option("--impression", inv.impression, "impression id (rank)");
    cmd->add_option("--flag", inv.flags, "NEWSID=clicked|clickbait (rank, repeatable)")
        ->allow_extra_args(false);
    if (std::string(c.name) == "synth") add_key_flags<SyntheticSettings>(cmd, inv);
    else add_key_flags<TrainConfig>(cmd, inv);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, kExitUsage, "usage", e.what());
    return kExitUsage;
  }

  const Command* chosen = nullptr;
  for (auto* sub : app.get_subcommands()) chosen = by_app.at(sub);
  try {
    return chosen->run(inv, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e);
    report_error(err, code, e.kind(), e.what());
    return code;
  } catch (const std::exception& e) {
    report_error(err, kExitData, "io", e.what());
    return kExitData;
  }
}

}  // namespace tdnr

#endif  // TDNR_CLI_HPP_
