#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "racglab/errors.hpp"
#include "racglab/graph.hpp"
#include "racglab/group.hpp"
#include "racglab/harness.hpp"
#include "racglab/metric.hpp"
#include "racglab/walk.hpp"
#include "racglab/walls.hpp"

using nlohmann::json;
using namespace racglab;

namespace {

std::string sha256_hex(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

class Phases {
 public:
  void mark(const std::string& name) {
    auto now = std::chrono::steady_clock::now();
    timing_[name] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  const json& timing() const { return timing_; }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  json timing_ = json::object();
};

// A flag that maps onto a config key; only applied when given on the command line.
struct Binding {
  CLI::Option* option;
  std::string key;
  std::function<json()> value;
};

struct Flags {
  std::string graph, measure, config, out;
  double lazy = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int radius = 0, steps = 0, n_max = 0, scale = 0, power = 0, offsets = 0, deviation_offset = 0,
      max_r = 0;
  std::string element, wall, barrier_mode, mode, geodesic;
  std::size_t split = 0, narrow_s = 0, r = 0, d = 0, l = 0, good_r = 0, min_length = 0,
              max_length = 0, max_triples = 0, max_sources = 0;
  double k = 0.0, theta = 0.0;
  std::vector<std::string> base_points;
  bool print_config = false;

  // Command-specific.
  std::string from, to, w1, w2, word, start, records, summary, out_dir, graph_path;
  std::vector<std::string> forbid, avoid_ball;
  std::size_t walks = 10000, cap = 100000;
  bool all = false, exact = false;
};

template <class T>
void bound(CLI::App& app, std::vector<Binding>& out, const std::string& name, const std::string& key,
          T& store, const std::string& help) {
  auto* o = app.add_option(name, store, help);
  out.push_back({o, key, [&store] { return json(store); }});
}

struct Context {
  ExperimentConfig cfg;
  json manifest;
  Phases phases;
};

DefiningGraph need_graph(const ExperimentConfig& cfg) {
  if (cfg.graph_file.empty()) throw ValidationError("--graph is required");
  return load_graph(cfg.graph_file);
}

MeasureSpec need_measure(const DefiningGraph& g, const ExperimentConfig& cfg) {
  if (cfg.measure_file.empty()) return MeasureSpec::uniform(g, cfg.lazy);
  if (cfg.lazy != 0.0) throw ValidationError("--lazy applies to the uniform measure only");
  return MeasureSpec::load(g, cfg.measure_file);
}

Domain make_domain(const Group& group, const ExperimentConfig& cfg, const Flags& f) {
  auto ball = std::make_shared<const BallIndex>(enumerate_ball(group, cfg.radius));
  Domain dom(ball);
  for (const auto& w : f.forbid) dom.forbid(group.parse(w));
  for (const auto& spec : f.avoid_ball) {
    auto colon = spec.rfind(':');
    if (colon == std::string::npos)
      throw ValidationError("--avoid-ball expects WORD:RADIUS, got '" + spec + "'");
    std::size_t r = 0;
    try {
      r = std::stoul(spec.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationError("--avoid-ball radius must be a non-negative integer in '" + spec + "'");
    }
    dom.forbid_ball(group.parse(spec.substr(0, colon)), r);
  }
  return dom;
}

void emit(Context& ctx, json result) {
  ctx.phases.mark("output");
  ctx.manifest["timing"] = ctx.phases.timing();
  if (result.is_object())
    result["manifest"] = ctx.manifest;
  else
    result = json{{"result", result}, {"manifest", ctx.manifest}};
  std::cout << result.dump(2) << "\n";
}

std::string summary_path(const std::string& csv) {
  std::filesystem::path p(csv);
  return (p.parent_path() / (p.stem().string() + ".summary.json")).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random walks and walls in right-angled Coxeter groups", "lab"};
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);
  Flags f;
  std::vector<Binding> binds;

  bound(app, binds, "--graph", "graph_file", f.graph, "graph file (JSON)");
  bound(app, binds, "--measure", "measure_file", f.measure, "measure file (JSON); uniform if omitted");
  bound(app, binds, "--lazy", "lazy", f.lazy, "holding probability of the uniform measure");
  bound(app, binds, "--seed", "seed", f.seed, "random seed; chosen and printed when omitted");
  bound(app, binds, "--threads", "threads", f.threads, "worker threads");
  bound(app, binds, "--radius", "radius", f.radius, "ball radius");
  bound(app, binds, "--steps", "steps", f.steps, "walk steps N");
  bound(app, binds, "--element", "element", f.element, "element g");
  bound(app, binds, "--wall", "wall", f.wall, "generator naming a wall through e");
  bound(app, binds, "--barrier-mode", "barrier_mode", f.barrier_mode, "skewer | local");
  bound(app, binds, "--mode", "mode", f.mode, "antipodal mode: narrow | goodpoint");
  bound(app, binds, "--geodesic", "geodesic", f.geodesic, "geodesic word from e");
  bound(app, binds, "--split", "split", f.split, "index of z on the geodesic");
  bound(app, binds, "--narrow-s", "narrow_s", f.narrow_s, "narrowness s");
  bound(app, binds, "--k", "k", f.k, "antipodal constant k");
  bound(app, binds, "--r", "r", f.r, "barrier radius r");
  bound(app, binds, "--power", "power", f.power, "f = g^power");
  bound(app, binds, "--d", "d", f.d, "contraction constant D");
  bound(app, binds, "--l", "l", f.l, "minimal segment length L");
  bound(app, binds, "--good-r", "good_r", f.good_r, "good point length R");
  bound(app, binds, "--theta", "theta", f.theta, "good point proportion");
  bound(app, binds, "--scale", "scale", f.scale, "test scale T");
  bound(app, binds, "--min-length", "min_length", f.min_length, "smallest d(x,y)");
  bound(app, binds, "--max-length", "max_length", f.max_length, "largest d(x,y)");
  bound(app, binds, "--offsets", "offsets", f.offsets, "control offsets 0..t");
  bound(app, binds, "--deviation-offset", "deviation_offset", f.deviation_offset,
       "deviation offsets 0..t");
  bound(app, binds, "--max-r", "max_r", f.max_r, "deviation sweep ceiling");
  bound(app, binds, "--base", "base_points", f.base_points, "martin base points");
  bound(app, binds, "--n-max", "n_max", f.n_max, "series length");
  bound(app, binds, "--max-triples", "max_triples", f.max_triples, "triple cap");
  bound(app, binds, "--max-sources", "max_sources", f.max_sources, "source cap");
  bound(app, binds, "--out", "output", f.out, "record CSV path");
  app.add_option("--config", f.config, "config file (JSON)");
  app.add_flag("--print-config", f.print_config, "print the effective configuration and exit");

  std::string command;
  auto sub = [&](CLI::App* parent, const std::string& name, const std::string& help) {
    auto* s = parent->add_subcommand(name, help);
    return s;
  };
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help,
                  const std::string& id) {
    auto* s = parent->add_subcommand(name, help);
    s->callback([&command, id] { command = id; });
    return s;
  };
  auto from_to = [&](CLI::App* s) {
    s->add_option("--from", f.from, "word")->required();
    s->add_option("--to", f.to, "word")->required();
  };
  auto domain_opts = [&](CLI::App* s) {
    s->add_option("--forbid", f.forbid, "forbidden element (repeatable)");
    s->add_option("--avoid-ball", f.avoid_ball, "forbid WORD:RADIUS (repeatable)");
  };

  auto* graph = sub(&app, "graph", "defining graph");
  auto* check = leaf(graph, "check", "graph predicates and seed conditions", "graph check");
  check->add_option("path", f.graph_path, "graph file");
  graph->require_subcommand(1);

  auto* group = sub(&app, "group", "word problem and balls");
  leaf(group, "ball", "sphere sizes and growth", "group ball");
  auto* geo = leaf(group, "geodesic", "canonical geodesic", "group geodesic");
  from_to(geo);
  geo->add_flag("--all", f.all, "list every geodesic");
  geo->add_option("--cap", f.cap, "geodesic enumeration cap");
  from_to(leaf(group, "distance", "word metric", "group distance"));
  group->require_subcommand(1);

  auto* walls = sub(&app, "walls", "walls of the Davis complex");
  from_to(leaf(walls, "separating", "walls separating two elements", "walls separating"));
  auto* cross = leaf(walls, "cross", "crossing test", "walls cross");
  cross->add_option("--w1", f.w1, "reflection word")->required();
  cross->add_option("--w2", f.w2, "reflection word")->required();
  auto* strong = leaf(walls, "strongsep", "strong separation at a scale", "walls strongsep");
  strong->add_option("--w1", f.w1, "reflection word")->required();
  strong->add_option("--w2", f.w2, "reflection word")->required();
  auto* skew = leaf(walls, "skewers", "does g skewer a wall", "walls skewers");
  skew->add_option("--w1", f.w1, "reflection word")->required();
  walls->require_subcommand(1);

  auto* walk = sub(&app, "walk", "random walks");
  auto* green = leaf(walk, "green", "restricted Green function", "walk green");
  from_to(green);
  domain_opts(green);
  green->add_flag("--exact", f.exact, "also evaluate in rational arithmetic");
  auto* mc = leaf(walk, "mc", "Monte Carlo Green estimate", "walk mc");
  from_to(mc);
  mc->add_option("--walks", f.walks, "number of walks");
  domain_opts(leaf(walk, "spectral", "spectral radius lower bounds", "walk spectral"));
  auto* kernel = leaf(walk, "kernel", "Martin kernels along an axis", "walk kernel");
  kernel->add_option("--at", f.from, "base point x");
  domain_opts(kernel);
  walk->require_subcommand(1);

  auto* dec = leaf(&app, "decompose", "(D,L)-decomposition of a geodesic", "decompose");
  dec->add_option("--word", f.word, "geodesic word")->required();
  dec->add_option("--start", f.start, "start element");
  auto* good = leaf(&app, "goodpoints", "good points of a geodesic", "goodpoints");
  good->add_option("--word", f.word, "geodesic word")->required();
  good->add_option("--start", f.start, "start element");

  auto* ancona = sub(&app, "ancona", "Ancona experiments");
  for (const char* k : {"morse-axis", "barrier", "antipodal", "deviation", "martin", "control"})
    leaf(ancona, k, std::string(k) + " experiment", std::string("ancona ") + k);
  ancona->require_subcommand(1);

  auto* report = sub(&app, "report", "reports");
  auto* render = leaf(report, "render", "SVG and markdown from a record file", "report render");
  render->add_option("--records", f.records, "record CSV")->required();
  render->add_option("--summary", f.summary, "summary JSON");
  render->add_option("--out-dir", f.out_dir, "output directory")->required();
  report->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << " (see lab --help)\n";
    return 2;
  }

  try {
    Context ctx;
    json eff = ExperimentConfig{}.to_json();
    bool seeded = false;
    if (!f.config.empty()) {
      json file;
      try {
        file = json::parse(read_text_file(f.config));
      } catch (const json::parse_error& e) {
        throw ValidationError("malformed JSON in " + f.config + ": " + e.what());
      }
      ExperimentConfig probe;
      probe.apply(file);
      for (const auto& [key, v] : file.items()) eff[key] = v;
      seeded = file.contains("seed");
    }
    for (const auto& b : binds)
      if (b.option->count() > 0) {
        eff[b.key] = b.value();
        if (b.key == "seed") seeded = true;
      }
    if (!f.graph_path.empty()) eff["graph_file"] = f.graph_path;
    if (command.rfind("ancona ", 0) == 0) eff["kind"] = command.substr(7);
    if (!seeded) {
      std::random_device rd;
      std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      eff["seed"] = s;
      std::cerr << "seed: " << s << "\n";
    }
    ctx.cfg = ExperimentConfig::from_json(eff);
    ctx.cfg.validate();

    if (f.print_config) {
      std::cout << ctx.cfg.to_json().dump(2) << "\n";
      return 0;
    }
    if (command.empty()) throw ValidationError("a subcommand is required (see lab --help)");

    std::string line;
    for (int i = 0; i < argc; ++i) line += (i ? " " : "") + std::string(argv[i]);
    // Where results go and how many threads compute them leave them unchanged.
    json hashed = ctx.cfg.to_json();
    hashed.erase("output");
    hashed.erase("threads");
    ctx.manifest = {{"command", line},
                    {"config_hash", sha256_hex(hashed.dump())},
                    {"seed", ctx.cfg.seed},
                    {"version", kToolVersion}};
    const auto& cfg = ctx.cfg;

    if (command == "report render") {
      std::string hash;
      auto records = records_from_csv(read_text_file(f.records), &hash);
      ReportSummary summary;
      if (!f.summary.empty()) {
        json j;
        try {
          j = json::parse(read_text_file(f.summary));
        } catch (const json::parse_error& e) {
          throw ValidationError("malformed JSON in " + f.summary + ": " + e.what());
        }
        summary = ReportSummary::from_json(j);
        if (summary.count != records.size())
          throw ValidationError("summary counts " + std::to_string(summary.count) +
                                " rows but the record file has " + std::to_string(records.size()));
      } else {
        summary = summarize(records);
        summary.manifest = hash;
      }
      ctx.phases.mark("load");
      auto rendered = render_report(summary, records);
      std::filesystem::create_directories(f.out_dir);
      auto svg = (std::filesystem::path(f.out_dir) / "report.svg").string();
      auto md = (std::filesystem::path(f.out_dir) / "report.md").string();
      write_text_file(svg, rendered.svg);
      write_text_file(md, rendered.markdown);
      emit(ctx, {{"svg", svg}, {"markdown", md}, {"rows", records.size()}});
      return 0;
    }

    const auto g = need_graph(cfg);
    ctx.phases.mark("load");
    if (command == "graph check") {
      emit(ctx, graph_report(g).to_json(g));
      return 0;
    }
    const Group grp(g);

    if (command == "group ball") {
      auto ce = critical_exponent_estimate(grp, cfg.radius);
      std::vector<std::size_t> spheres;
      for (std::size_t i = 0; i < ce.ball_sizes.size(); ++i)
        spheres.push_back(ce.ball_sizes[i] - (i ? ce.ball_sizes[i - 1] : 0));
      emit(ctx, {{"radius", cfg.radius},
                 {"size", ce.ball_sizes.back()},
                 {"sphere_sizes", spheres},
                 {"critical_exponent", ce.estimate}});
    } else if (command == "group geodesic") {
      auto a = grp.parse(f.from), b = grp.parse(f.to);
      json out{{"from", grp.format(a)},
               {"to", grp.format(b)},
               {"distance", grp.distance(a, b)},
               {"word", grp.format(grp.geodesic_word(a, b))}};
      if (f.all) {
        auto list = grp.all_geodesics(a, b, f.cap);
        json words = json::array();
        for (const auto& w : list.words) words.push_back(grp.format(w));
        out["geodesics"] = words;
        out["truncated"] = list.truncated;
      }
      emit(ctx, out);
    } else if (command == "group distance") {
      auto a = grp.parse(f.from), b = grp.parse(f.to);
      emit(ctx, {{"from", grp.format(a)}, {"to", grp.format(b)}, {"distance", grp.distance(a, b)}});
    } else if (command == "walls separating") {
      auto a = grp.parse(f.from), b = grp.parse(f.to);
      json ws = json::array();
      for (const auto& w : walls_separating(grp, a, b)) ws.push_back(grp.format(w.reflection()));
      emit(ctx, {{"from", grp.format(a)}, {"to", grp.format(b)}, {"count", ws.size()}, {"walls", ws}});
    } else if (command == "walls cross") {
      auto w1 = make_wall(grp, grp.parse(f.w1)), w2 = make_wall(grp, grp.parse(f.w2));
      json out{{"w1", grp.format(w1.reflection())},
               {"w2", grp.format(w2.reflection())},
               {"crosses", crosses(grp, w1, w2)}};
      if (!(w1 == w2) && !out["crosses"].get<bool>()) {
        auto n = wall_nesting(grp, w1, w2);
        out["nesting"] = {{"outer", std::string(1, side_char(n.outer))},
                          {"inner", std::string(1, side_char(n.inner))}};
      }
      emit(ctx, out);
    } else if (command == "walls strongsep") {
      auto w1 = make_wall(grp, grp.parse(f.w1)), w2 = make_wall(grp, grp.parse(f.w2));
      auto s = strongly_separated_at_scale(grp, w1, w2, cfg.scale);
      emit(ctx, {{"separated", s.separated},
                 {"scale", s.scale},
                 {"centre", grp.format(s.centre)},
                 {"witness", s.witness ? json(grp.format(s.witness->reflection())) : json(nullptr)},
                 {"walls_scanned", s.walls_scanned}});
    } else if (command == "walls skewers") {
      auto el = grp.parse(cfg.element);
      auto w = make_wall(grp, grp.parse(f.w1));
      emit(ctx, {{"element", grp.format(el)},
                 {"wall", grp.format(w.reflection())},
                 {"power", cfg.power},
                 {"skewers", skewers(grp, el, w, std::max(cfg.power, 2))}});
    } else if (command == "walk green") {
      auto mu = need_measure(g, cfg);
      auto dom = make_domain(grp, cfg, f);
      ctx.phases.mark("ball");
      auto x = grp.parse(f.from), y = grp.parse(f.to);
      auto v = restricted_green(x, y, dom, mu, cfg.steps, cfg.threads);
      json out = v.to_json(grp);
      if (f.exact) out["exact"] = restricted_green_exact(x, y, dom, mu, cfg.steps).get_str();
      emit(ctx, out);
    } else if (command == "walk mc") {
      auto mu = need_measure(g, cfg);
      auto est = mc_green(grp, grp.parse(f.from), grp.parse(f.to), mu, cfg.steps, f.walks, cfg.seed,
                          cfg.threads);
      emit(ctx, {{"estimate", est.estimate},
                 {"half_width", est.half_width},
                 {"walks", est.walks},
                 {"steps", est.steps},
                 {"seed", est.seed}});
    } else if (command == "walk spectral") {
      auto mu = need_measure(g, cfg);
      auto dom = make_domain(grp, cfg, f);
      auto seq = spectral_radius_lower(mu, dom, cfg.n_max);
      emit(ctx, {{"n_max", cfg.n_max}, {"sequence", seq}, {"domain", dom.descriptor()}});
    } else if (command == "walk kernel") {
      auto mu = need_measure(g, cfg);
      GreenSolver solver(make_domain(grp, cfg, f), mu, cfg.steps, cfg.threads);
      auto el = grp.parse(cfg.element), x = grp.parse(f.from);
      auto ks = kernel_series_along(solver, el, x, cfg.n_max);
      emit(ctx, {{"element", grp.format(el)},
                 {"x", grp.format(x)},
                 {"values", ks.values},
                 {"differences", ks.differences}});
    } else if (command == "decompose") {
      auto dec = decompose_DL(grp, grp.parse(f.start), grp.parse_word(f.word), cfg.d, cfg.l, cfg.scale);
      emit(ctx, dec.to_json());
    } else if (command == "goodpoints") {
      GoodPointParams p{cfg.theta, cfg.good_r, cfg.d, cfg.l, cfg.scale};
      emit(ctx, good_points(grp, grp.parse(f.start), grp.parse_word(f.word), p).to_json(grp));
    } else if (command.rfind("ancona ", 0) == 0) {
      Workspace ws(g, need_measure(g, cfg), cfg.radius, cfg.steps, cfg.threads);
      ctx.phases.mark("ball");
      auto res = run_experiment(ws, cfg);
      ctx.phases.mark("compute");
      auto summary = summarize(res.records, cfg.to_json(), res.notes);
      summary.manifest = ctx.manifest["config_hash"];
      json out = summary.to_json();
      if (!cfg.output.empty()) {
        write_text_file(cfg.output, records_to_csv(res.records, summary.manifest));
        write_text_file(summary_path(cfg.output), out.dump(2) + "\n");
        out["files"] = {cfg.output, summary_path(cfg.output)};
      }
      emit(ctx, out);
    } else {
      throw ValidationError("unknown command " + command);
    }
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const BudgetExceeded& e) {
    std::cerr << "error: budget exceeded: " << e.what() << " (raise LAB_MEM_CAP or shrink the run)\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
