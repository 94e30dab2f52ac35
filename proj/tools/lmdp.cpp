// lmdp: generate instances and datasets, evaluate coverage, run algorithms
// over seeds, and summarize records. See README for config keys.

#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "lmdp/cli.hpp"

using lmdp::cli::json;

namespace {

const std::set<std::string> kMulti = {"T_grid", "policies", "inputs", "baseline"};

json scalar(const std::string& text) {
  try {
    json j = json::parse(text);
    if (j.is_number() || j.is_boolean() || j.is_array()) return j;
  } catch (const json::exception&) {
  }
  return text;
}

struct Command {
  CLI::App* app = nullptr;
  std::string config;
  std::map<std::string, std::string> single;
  std::map<std::string, std::vector<std::string>> multi;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fine-tuning linear MDP policies from offline data plus online episodes"};
  app.require_subcommand(1);
  std::map<std::string, Command> cmds;
  const std::map<std::string, std::string> about = {
      {"gen", "write an instance JSON or an offline dataset JSONL"},
      {"eval", "coverage quantities for an instance and dataset"},
      {"run", "run an algorithm over seeds and write records CSV"},
      {"report", "aggregate records CSVs into summary tables"}};
  for (const auto& [name, text] : about) {
    Command& c = cmds[name];
    c.app = app.add_subcommand(name, text);
    c.app->add_option("--config", c.config, "JSON config file; flags override its values");
    for (const std::string& key : lmdp::cli::allowed_keys(name)) {
      if (name == "gen" && key == "kind") {
        c.app->add_option("kind", c.single[key], "separation | minimax | mab | random | offline");
      } else if (kMulti.count(key)) {
        c.app->add_option("--" + key, c.multi[key]);
      } else {
        c.app->add_option("--" + key, c.single[key]);
      }
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors are validation failures
  }

  try {
    for (auto& [name, c] : cmds) {
      if (!c.app->parsed()) continue;
      json flags = json::object();
      for (const auto& [key, value] : c.single)
        if (c.app->count(key == "kind" && name == "gen" ? "kind" : "--" + key) > 0) flags[key] = scalar(value);
      for (const auto& [key, values] : c.multi)
        if (c.app->count("--" + key) > 0) {
          json arr = json::array();
          for (const auto& v : values) arr.push_back(scalar(v));
          flags[key] = arr;
        }
      const json file = c.config.empty() ? json(nullptr) : lmdp::io::load_json(c.config);
      const json cfg = lmdp::cli::merge_config(name, file, flags);
      std::cout << lmdp::cli::dispatch(name, cfg).dump(1) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lmdp::cli::exit_code(e);
  }
  return 0;
}
