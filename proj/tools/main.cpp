#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "topoxpert/agent.hpp"
#include "topoxpert/benchgen.hpp"
#include "topoxpert/checker.hpp"
#include "topoxpert/error.hpp"
#include "topoxpert/eval.hpp"
#include "topoxpert/library.hpp"
#include "topoxpert/llm.hpp"
#include "topoxpert/netlist.hpp"

namespace fs = std::filesystem;
using namespace topoxpert;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

// key=value config file; file values fill flags the user left at defaults
// only via env-style lookup (flags > env > file).
std::map<std::string, std::string> load_config_file(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  if (!in) throw Error("IoError", "cannot read config " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    size_t eq = line.find('=', first);
    if (eq == std::string::npos) continue;
    std::string key = line.substr(first, eq - first);
    std::string val = line.substr(eq + 1);
    auto strip = [](std::string& s) {
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
      size_t b = s.find_first_not_of(" \t");
      if (b != std::string::npos) s = s.substr(b);
    };
    strip(key);
    strip(val);
    kv[key] = val;
  }
  return kv;
}

Library load_library_opt(const std::string& path) {
  return path.empty() ? builtin_library() : load_library(path);
}

int cmd_bench_gen(uint64_t seed, const std::vector<std::string>& quota_flags,
                  const std::string& out_path, bool enumerate, const std::string& lib_path) {
  Library lib = load_library_opt(lib_path);
  std::map<TaskCategory, int> quotas;
  if (quota_flags.empty()) {
    quotas = default_quotas();
  } else {
    for (const auto& q : quota_flags) {
      size_t eq = q.find('=');
      if (eq == std::string::npos) throw Error("SchemaError", "bad --quota, want TaskK=N: " + q);
      auto cat = task_category_from(q.substr(0, eq));
      if (!cat) throw Error("SchemaError", "unknown category in --quota: " + q);
      quotas[*cat] = std::stoi(q.substr(eq + 1));
    }
  }
  auto tasks = generate_benchmark(seed, quotas, lib, enumerate);
  write_benchmark(tasks, out_path);
  std::map<TaskCategory, int> counts;
  for (const auto& t : tasks) ++counts[t.category];
  for (const auto& [cat, n] : counts) std::cout << task_category_name(cat) << ": " << n << "\n";
  std::cout << "total: " << tasks.size() << " -> " << out_path << "\n";
  return 0;
}

int cmd_check(const std::string& netlist_path, const std::string& req_path, bool as_json,
              const std::string& lib_path) {
  Library lib = load_library_opt(lib_path);
  ParseResult parsed = parse_netlist(read_file(netlist_path), lib);
  if (!parsed.ok()) {
    for (const auto& d : parsed.diagnostics) {
      std::cerr << netlist_path << ":" << d.line << ":" << d.column << ": " << d.message << "\n";
    }
    return 1;
  }
  AnnotatedTopology annotated = annotate(*parsed.topology, lib);
  CheckReport report;
  if (!req_path.empty()) {
    StructureRequirement req;
    from_json(nlohmann::json::parse(read_file(req_path)), req);
    report = check(annotated, req, lib);
  } else {
    report = check_connection_only(annotated, lib);
  }
  if (as_json) {
    std::cout << report_to_json(report) << "\n";
  } else if (report.passed) {
    std::cout << "pass\n";
  } else {
    for (const auto& v : report.violations) {
      std::cout << v.rule << " [";
      for (size_t i = 0; i < v.subjects.size(); ++i) std::cout << (i ? " " : "") << v.subjects[i];
      std::cout << "] " << rule_info(v.rule)->statement;
      if (!v.detail.empty()) std::cout << " " << v.detail;
      std::cout << "\n";
    }
  }
  return report.passed ? 0 : 2;
}

// Scripted-run script file: JSON lines {"task": id, "responses": [...]}.
// A line with "task": "*" supplies the fallback script.
std::map<std::string, std::vector<std::string>> load_script(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> scripts;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      scripts[j.at("task").get<std::string>()] =
          j.at("responses").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error("SchemaError", "script line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return scripts;
}

int cmd_run(const std::string& bench_path, const std::string& transcripts_dir,
            const std::string& client_kind, const std::string& script_path,
            const std::string& cassette_path, const std::string& golden_path, int max_rounds,
            int parallel, const std::string& lib_path, const HttpClientConfig& http_cfg) {
  Library lib = load_library_opt(lib_path);
  auto tasks = read_benchmark(bench_path);
  fs::create_directories(transcripts_dir);

  AgentConfig config;
  config.max_rounds = max_rounds;
  config.model = http_cfg.model;
  config.example_pool =
      golden_path.empty() ? builtin_golden_cases(lib) : read_golden(golden_path, lib);

  std::map<std::string, std::vector<std::string>> scripts;
  std::unique_ptr<HttpChatClient> http;
  std::unique_ptr<RecordReplayClient> replay;
  if (client_kind == "scripted") {
    if (script_path.empty()) throw Error("SchemaError", "--client scripted needs --script");
    scripts = load_script(script_path);
  } else if (client_kind == "http") {
    http = std::make_unique<HttpChatClient>(http_cfg);
    if (!cassette_path.empty()) {
      replay = std::make_unique<RecordReplayClient>(http.get(), cassette_path,
                                                    CassetteMode::Record);
    }
  } else if (client_kind == "replay") {
    if (cassette_path.empty()) throw Error("SchemaError", "--client replay needs --cassette");
    replay = std::make_unique<RecordReplayClient>(nullptr, cassette_path, CassetteMode::Replay);
  } else {
    throw Error("SchemaError", "unknown --client: " + client_kind);
  }

  std::atomic<size_t> next{0};
  std::atomic<int> written{0}, skipped{0}, failed{0};
  std::mutex log_mu;

  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const BenchmarkTask& task = tasks[i];
      fs::path out = fs::path(transcripts_dir) / (task.id + ".json");
      if (fs::exists(out)) {
        ++skipped;
        continue;
      }
      try {
        std::unique_ptr<ScriptedClient> scripted;
        ChatClient* client = nullptr;
        if (client_kind == "scripted") {
          auto it = scripts.find(task.id);
          if (it == scripts.end()) it = scripts.find("*");
          scripted = std::make_unique<ScriptedClient>(
              it == scripts.end() ? std::vector<std::string>{} : it->second);
          client = scripted.get();
        } else if (replay) {
          client = replay.get();
        } else {
          client = http.get();
        }
        Episode ep = run_episode(task, *client, config, lib);
        write_file_atomic(out, episode_to_json(ep));
        ++written;
      } catch (const std::exception& e) {
        ++failed;
        std::lock_guard<std::mutex> lock(log_mu);
        std::cerr << task.id << ": " << e.what() << "\n";
      }
    }
  };

  if (parallel <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < parallel; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  std::cout << "episodes written: " << written << ", skipped existing: " << skipped
            << ", failed: " << failed << "\n";
  return failed > 0 ? 1 : 0;
}

int cmd_eval(const std::string& transcripts_dir, const std::string& bench_path,
             const std::string& golden_path, const std::string& format,
             const std::string& out_path, const std::string& lib_path) {
  Library lib = load_library_opt(lib_path);
  std::vector<Episode> episodes;
  int missing = 0;

  if (!bench_path.empty()) {
    for (const auto& task : read_benchmark(bench_path)) {
      fs::path p = fs::path(transcripts_dir) / (task.id + ".json");
      if (!fs::exists(p)) {
        std::cerr << "warning: MissingEpisode " << task.id << " (excluded from totals)\n";
        ++missing;
        continue;
      }
      episodes.push_back(episode_from_json(read_file(p), lib));
    }
  }

  EvalReport report = grade_synthetic(episodes);

  if (!golden_path.empty()) {
    auto golden = read_golden(golden_path, lib);
    std::vector<GoldenCase> present;
    std::vector<Episode> real_eps;
    for (const auto& gc : golden) {
      fs::path p = fs::path(transcripts_dir) / (gc.task.id + ".json");
      if (!fs::exists(p)) {
        std::cerr << "warning: MissingEpisode " << gc.task.id << " (excluded from totals)\n";
        ++missing;
        continue;
      }
      present.push_back(gc);
      real_eps.push_back(episode_from_json(read_file(p), lib));
    }
    report.real = grade_real(present, real_eps, lib).real;
  }

  std::string text =
      render_report(report, format == "json" ? ReportFormat::Json : ReportFormat::Text);
  std::cout << text;
  if (!out_path.empty()) write_file_atomic(out_path, text);
  return 0;
}

int cmd_lib_show(const std::string& lib_path) {
  Library lib = load_library_opt(lib_path);
  for (const auto& d : lib.defs()) {
    std::cout << d.name << " (class " << signature_class(d) << "):";
    for (const auto& t : d.terminals) {
      std::cout << " " << t.name << ":" << terminal_role_name(t.role);
    }
    std::cout << "\n";
  }
  std::cout << lib.size() << " kinds, version " << lib.version << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topoxpert — analog topology synthesis toolkit"};
  app.require_subcommand(1);

  std::string config_path, lib_path;
  app.add_option("--config", config_path, "key=value config file (flags > env > file)");
  app.add_option("--library", lib_path, "user subcircuit library JSON (merged with built-ins)");

  // bench gen
  auto* bench = app.add_subcommand("bench", "benchmark files");
  auto* gen = bench->add_subcommand("gen", "generate a synthetic benchmark");
  uint64_t seed = 1;
  std::string bench_out = "benchmark.jsonl";
  std::vector<std::string> quota_flags;
  bool enumerate = false;
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", bench_out, "output JSON-lines path");
  gen->add_option("--quota", quota_flags, "per-category quota, e.g. Task1=3 (repeatable)");
  gen->add_flag("--enumerate", enumerate, "walk the requirement space in fixed order");

  // check
  auto* chk = app.add_subcommand("check", "proofread a netlist");
  std::string netlist_path, req_path;
  bool as_json = false;
  chk->add_option("netlist", netlist_path, "netlist file")->required();
  chk->add_option("--req", req_path, "requirement JSON (enables selection rules)");
  chk->add_flag("--json", as_json, "machine-readable report");

  // run (non-deterministic with --client http: live model responses vary)
  auto* run = app.add_subcommand(
      "run", "run synthesis episodes (non-deterministic with --client http)");
  std::string run_bench, transcripts = "transcripts", client_kind = "http";
  std::string script_path, cassette_path, golden_path_run;
  int max_rounds = 10, parallel = 1;
  run->add_option("--bench", run_bench, "benchmark JSON-lines file")->required();
  run->add_option("--transcripts", transcripts, "episode output directory (resumable)");
  run->add_option("--client", client_kind, "scripted | http | replay");
  run->add_option("--script", script_path, "scripted-client responses JSONL");
  run->add_option("--cassette", cassette_path, "record/replay cassette JSONL");
  run->add_option("--golden", golden_path_run, "golden cases for in-context examples");
  run->add_option("--max-rounds", max_rounds, "proofreading round cap");
  run->add_option("--parallel", parallel, "episodes run concurrently");

  // eval
  auto* ev = app.add_subcommand("eval", "grade a transcript directory");
  std::string eval_transcripts, eval_bench, eval_golden, eval_format = "text", eval_out;
  ev->add_option("--transcripts", eval_transcripts, "episode directory")->required();
  ev->add_option("--bench", eval_bench, "benchmark file for synthetic grading");
  ev->add_option("--golden", eval_golden, "golden cases for real grading");
  ev->add_option("--format", eval_format, "text | json");
  ev->add_option("--out", eval_out, "also write the report here");

  // lib show
  auto* libcmd = app.add_subcommand("lib", "subcircuit library");
  auto* show = libcmd->add_subcommand("show", "print the library table");

  CLI11_PARSE(app, argc, argv);

  try {
    // Precedence: flags > env > config file.
    HttpClientConfig http_cfg = HttpClientConfig::from_env();
    if (!config_path.empty()) {
      auto kv = load_config_file(config_path);
      auto fill = [&](const char* key, std::string& slot) {
        if (slot.empty() && kv.count(key)) slot = kv[key];
      };
      fill("api_key", http_cfg.api_key);
      fill("api_base", http_cfg.base_url);
      if (http_cfg.model == "gpt-4o" && kv.count("model")) http_cfg.model = kv["model"];
      fill("library", lib_path);
    }

    if (gen->parsed()) return cmd_bench_gen(seed, quota_flags, bench_out, enumerate, lib_path);
    if (chk->parsed()) return cmd_check(netlist_path, req_path, as_json, lib_path);
    if (run->parsed()) {
      return cmd_run(run_bench, transcripts, client_kind, script_path, cassette_path,
                     golden_path_run, max_rounds, parallel, lib_path, http_cfg);
    }
    if (ev->parsed()) {
      return cmd_eval(eval_transcripts, eval_bench, eval_golden, eval_format, eval_out, lib_path);
    }
    if (show->parsed()) return cmd_lib_show(lib_path);
    std::cerr << app.help();
    return 1;
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
