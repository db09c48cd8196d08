// Copyright 2026 The SelfEmo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: gen-world, train and report over the C API.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "selfemo/selfemo.h"

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kConfig = 2, kCollision = 3, kMissing = 4 };

int exit_code(selfemo_status s) {
  switch (s) {
    case SELFEMO_OK: return kOk;
    case SELFEMO_CONFIG:
    case SELFEMO_INVALID_ARGUMENT: return kConfig;
    case SELFEMO_OUTPUT_EXISTS: return kCollision;
    case SELFEMO_MISSING_INPUT: return kMissing;
    default: return kRuntime;
  }
}

int report_failure(const char* what, selfemo_status s) {
  std::fprintf(stderr, "selfemo %s: %s: %s\n", what, selfemo_status_name(s), selfemo_last_error());
  return exit_code(s);
}

struct Options {
  std::string config;
  std::string out = ".";
  bool force = false;
  std::optional<std::uint64_t> seed;
  int resume = -1;
};

// Loads the config and applies --seed; returns nullptr after printing an error.
selfemo_config* load(const Options& o, const char* what, int& code) {
  selfemo_config* cfg = nullptr;
  selfemo_status s = selfemo_config_load(o.config.c_str(), &cfg);
  if (s == SELFEMO_OK && o.seed) s = selfemo_config_set_seed(cfg, *o.seed);
  if (s != SELFEMO_OK) {
    selfemo_config_free(cfg);
    code = report_failure(what, s);
    return nullptr;
  }
  return cfg;
}

void print_line(const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-play emotion training loop on a synthetic persona world"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-world", "Generate train/held-out dialogues and archetypes");
  auto* train = app.add_subcommand("train", "Cold start plus K flywheel iterations");
  auto* report = app.add_subcommand("report", "Summarize a finished run");
  for (auto* sub : {gen, train}) {
    sub->add_option("--config", o.config, "JSON run configuration")->required();
    sub->add_option("--out", o.out, "Output directory");
    sub->add_flag("--force", o.force, "Overwrite existing outputs");
    sub->add_option("--seed", o.seed, "Override the config seed");
  }
  train->add_option("--resume", o.resume, "Continue after this completed iteration")
      ->check(CLI::NonNegativeNumber);
  report->add_option("--out", o.out, "Run output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  int code = kOk;
  if (*gen) {
    selfemo_config* cfg = load(o, "gen-world", code);
    if (!cfg) return code;
    const selfemo_status s = selfemo_gen_world(cfg, o.out.c_str(), o.force);
    selfemo_config_free(cfg);
    if (s != SELFEMO_OK) return report_failure("gen-world", s);
    std::printf("world written to %s/world\n", o.out.c_str());
    return kOk;
  }
  if (*train) {
    selfemo_config* cfg = load(o, "train", code);
    if (!cfg) return code;
    const selfemo_status s =
        selfemo_train(cfg, o.out.c_str(), o.force, o.resume, print_line, nullptr);
    selfemo_config_free(cfg);
    if (s != SELFEMO_OK) return report_failure("train", s);
    return kOk;
  }
  char* text = nullptr;
  const selfemo_status s = selfemo_report(o.out.c_str(), &text);
  if (s != SELFEMO_OK) return report_failure("report", s);
  std::fputs(text, stdout);
  selfemo_string_free(text);
  return kOk;
}
