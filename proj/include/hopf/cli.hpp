#pragma once

#include <cstdlib>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "hopf/io.hpp"

namespace hopf::cli {

enum class Command { Field, Index, Chern, Scaling, Texture, Preimage, Neighborhood, Link, Adiabatic, Campaign };

inline const std::map<std::string, Command>& command_names() {
  static const std::map<std::string, Command> names{
      {"field", Command::Field},       {"index", Command::Index},
      {"chern", Command::Chern},       {"scaling", Command::Scaling},
      {"texture", Command::Texture},   {"preimage", Command::Preimage},
      {"neighborhood", Command::Neighborhood}, {"link", Command::Link},
      {"adiabatic", Command::Adiabatic}, {"campaign", Command::Campaign}};
  return names;
}

inline std::string to_string(Command c) {
  for (const auto& [name, cmd] : command_names()) {
    if (cmd == c) return name;
  }
  return "?";
}

struct RunConfig {
  Command command = Command::Index;
  std::vector<double> h;
  std::vector<int> n{10};
  std::vector<BlochVector> spins;
  std::optional<double> epsilon;
  int res = 64;
  long photons = kPhotonsPerSite;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  std::string format = "json";
  unsigned threads = 0;
  ConnectionScheme scheme = ConnectionScheme::Central;
  std::optional<std::string> input;
  std::array<double, 3> k_frac{0.4, 0.3, 0.5};
  std::size_t stride = 1;
  bool embed = false;
};

/// Thrown for --help; carries the text to print.
struct HelpRequested {
  std::string text;
};

namespace detail {

[[noreturn]] inline void usage(const std::string& what) { fail(ErrorKind::UsageError, what); }

inline std::vector<double> parse_reals(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      usage(flag + ": '" + text + "' is not a comma-separated list of numbers");
    }
  }
  return out;
}

inline BlochVector parse_spin(const std::string& text, const std::string& flag) {
  const auto v = parse_reals(text, flag);
  if (v.size() != 3) usage(flag + ": '" + text + "' needs three components");
  const BlochVector s(v[0], v[1], v[2]);
  if (!(s.norm() > 0.0) || !s.allFinite()) usage(flag + ": '" + text + "' is not a nonzero direction");
  return s.normalized();
}

// Flags every subcommand accepts; the rest are listed per subcommand.
inline const std::set<std::string> kCommonFlags{"--h", "--threads", "--out", "--config"};

inline const std::map<Command, std::set<std::string>>& allowed_flags() {
  static const std::map<Command, std::set<std::string>> table{
      {Command::Field, {"--n"}},
      {Command::Index, {"--n", "--scheme", "--input"}},
      {Command::Chern, {"--n", "--input"}},
      {Command::Scaling, {"--n", "--scheme"}},
      {Command::Texture, {"--n", "--input", "--format"}},
      {Command::Preimage, {"--spin", "--spins", "--res", "--embed"}},
      {Command::Neighborhood, {"--n", "--input", "--spin", "--spins", "--eps"}},
      {Command::Link, {"--spin", "--spins", "--res"}},
      {Command::Adiabatic, {"--k-frac", "--stride"}},
      {Command::Campaign, {"--n", "--photons", "--seed"}}};
  return table;
}

}  // namespace detail

/// Parses argv (without the program name) into a validated config.
/// Values from --config are overridden by flags on the command line.
inline RunConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"Hopf insulator toolkit", "hopf"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with default flag values");

  std::vector<double> h;
  std::vector<int> n;
  std::vector<std::string> spin;
  std::string spins, out, format = "json", scheme = "central", input, k_frac;
  double eps = 0.0;
  int res = 64;
  long photons = kPhotonsPerSite;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::size_t stride = 1;
  bool embed = false;

  std::map<std::string, CLI::Option*> opts;
  opts["--h"] = app.add_option("--h", h, "Model parameter h (repeat for several)")->allow_extra_args(false);
  opts["--n"] = app.add_option("--n", n, "Mesh points per axis (repeat for several; default 10)")->allow_extra_args(false);
  opts["--spin"] = app.add_option("--spin", spin, "Target spin direction x,y,z (normalized; repeatable)")
                       ->allow_extra_args(false);
  opts["--spins"] = app.add_option("--spins", spins, "Target spins separated by ';'");
  opts["--eps"] = app.add_option("--eps", eps, "Neighborhood radius on the Bloch sphere");
  opts["--res"] = app.add_option("--res", res, "Preimage grid resolution (default 64)");
  opts["--photons"] = app.add_option("--photons", photons, "Photons per site (default 93000; 0 = noiseless)");
  opts["--seed"] = app.add_option("--seed", seed, "Campaign seed (default 0)");
  opts["--out"] = app.add_option("--out", out, "Output file");
  opts["--format"] = app.add_option("--format", format, "json or csv");
  opts["--threads"] = app.add_option("--threads", threads, "Worker threads (0 = auto)");
  opts["--scheme"] = app.add_option("--scheme", scheme, "Connection scheme: central or exact");
  opts["--input"] = app.add_option("--input", input, "Read a state-field JSON instead of sampling");
  opts["--k-frac"] = app.add_option("--k-frac", k_frac, "Momentum as fractions of 2pi: x,y,z");
  opts["--stride"] = app.add_option("--stride", stride, "Emit every stride-th schedule sample");
  opts["--embed"] = app.add_flag("--embed", embed, "Emit preimages embedded in R3");
  opts["--config"] = app.get_config_ptr();

  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, cmd] : command_names()) subs[name] = app.add_subcommand(name)->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    detail::usage(e.what());
  }

  RunConfig c;
  std::string name;
  for (const auto& [sub_name, sub] : subs) {
    if (sub->parsed()) name = sub_name;
  }
  c.command = command_names().at(name);

  const auto& allowed = detail::allowed_flags().at(c.command);
  for (const auto& [flag, opt] : opts) {
    if (opt == nullptr || opt->count() == 0) continue;
    if (!detail::kCommonFlags.contains(flag) && !allowed.contains(flag)) {
      detail::usage(flag + " is not valid for '" + name + "'");
    }
  }
  const auto given = [&](const std::string& flag) { return opts.at(flag)->count() > 0; };

  if (given("--input")) {
    if (given("--h")) detail::usage("--h conflicts with --input (h is read from the file)");
    if (given("--n")) detail::usage("--n conflicts with --input (n is read from the file)");
    c.input = input;
  } else if (h.empty()) {
    detail::usage("--h is required for '" + name + "'");
  }
  for (double v : h) {
    if (!std::isfinite(v)) detail::usage("--h must be finite");
  }
  c.h = h;
  if (!n.empty()) c.n = n;
  for (int v : c.n) {
    if (v < 4) detail::usage("--n must be at least 4");
  }
  if (c.command != Command::Scaling) {
    if (c.h.size() > 1) detail::usage("--h takes one value for '" + name + "'");
    if (c.n.size() > 1) detail::usage("--n takes one value for '" + name + "'");
  }

  for (const auto& s : spin) c.spins.push_back(detail::parse_spin(s, "--spin"));
  if (given("--spins")) {
    std::stringstream ss(spins);
    std::string item;
    while (std::getline(ss, item, ';')) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      c.spins.push_back(detail::parse_spin(item, "--spins"));
    }
  }
  if ((c.command == Command::Preimage || c.command == Command::Neighborhood) && c.spins.empty()) {
    detail::usage("--spin is required for '" + name + "'");
  }
  if (c.command == Command::Link && c.spins.size() < 2) detail::usage("--spins needs at least two targets for 'link'");

  if (c.command == Command::Neighborhood) {
    if (!given("--eps")) detail::usage("--eps is required for 'neighborhood'");
    if (!(eps > 0.0 && eps <= 2.0)) detail::usage("--eps must lie in (0, 2]");
    c.epsilon = eps;
  }
  if (res < 16 || res > 128) detail::usage("--res must lie in [16, 128]");
  c.res = res;
  if (photons < 0 || (photons > 0 && photons < 3)) detail::usage("--photons must be 0 or at least 3");
  c.photons = photons;
  c.seed = seed;
  c.threads = threads;
  if (given("--out")) {
    if (out.empty()) detail::usage("--out must not be empty");
    c.out = out;
  }
  if (format != "json" && format != "csv") detail::usage("--format must be json or csv");
  c.format = format;
  if (scheme == "central") c.scheme = ConnectionScheme::Central;
  else if (scheme == "exact") c.scheme = ConnectionScheme::Exact;
  else detail::usage("--scheme must be central or exact");
  if (given("--k-frac")) {
    const auto v = detail::parse_reals(k_frac, "--k-frac");
    if (v.size() != 3) detail::usage("--k-frac needs three components");
    c.k_frac = {v[0], v[1], v[2]};
  }
  if (stride < 1) detail::usage("--stride must be at least 1");
  c.stride = stride;
  c.embed = embed;
  return c;
}

inline RunConfig parse_config(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return parse_config(args);
}

namespace detail {

inline std::string extension(const RunConfig& c) { return c.format == "csv" ? ".csv" : ".json"; }

/// Explicit --out wins; otherwise HOPF_OUTPUT_DIR/<command>.<ext>; otherwise stdout.
inline std::optional<std::filesystem::path> output_path(const RunConfig& c) {
  if (c.out) return std::filesystem::path(*c.out);
  if (const char* dir = std::getenv("HOPF_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
    return std::filesystem::path(dir) / (to_string(c.command) + extension(c));
  }
  return std::nullopt;
}

inline void emit(const RunConfig& c, const std::string& content, std::ostream& out) {
  if (const auto path = output_path(c)) {
    io::write_atomic(*path, content);
    out << "wrote " << path->string() << '\n';
  } else {
    out << content;
  }
}

inline io::json stamped(io::json j) {
  j["generated_at"] = io::iso8601_now();
  return j;
}

inline StateField load_or_sample(const RunConfig& c) {
  if (c.input) return io::state_field_from_json(io::parse(io::read_file(*c.input), *c.input));
  return sample_state_field({c.h.front()}, MeshSpec(c.n.front()), resolve_threads(c.threads));
}

inline std::vector<SpinTarget> targets(const RunConfig& c) {
  std::vector<SpinTarget> t;
  for (const auto& s : c.spins) t.push_back(SpinTarget::normalized(s));
  return t;
}

inline io::json run_index(const RunConfig& c) {
  const StateField f = load_or_sample(c);
  io::json j = io::to_json(hopf_index(f, {c.scheme, resolve_threads(c.threads)}));
  const auto expected = expected_hopf_index(f.params().h);
  j["expected"] = expected ? io::json(*expected) : io::json(nullptr);
  return j;
}

inline io::json run_chern(const RunConfig& c) {
  const StateField f = load_or_sample(c);
  std::array<std::vector<int>, 3> chern;
  bool all_zero = true;
  for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
    for (int layer = 0; layer < f.mesh().n; ++layer) {
      const int value = chern_number(slice_field(f, axis, layer));
      chern[std::size_t(axis)].push_back(value);
      all_zero = all_zero && value == 0;
    }
  }
  return {{"kind", "chern_numbers"}, {"h", f.params().h}, {"n", f.mesh().n},
          {"chern_numbers", io::chern_json(chern)}, {"all_zero", all_zero}};
}

inline io::json run_scaling(const RunConfig& c) {
  io::json studies = io::json::array();
  for (double h : c.h) {
    const auto rows = scaling_study(h, c.n, {c.scheme, resolve_threads(c.threads)});
    studies.push_back(io::to_json(rows, h, expected_hopf_index(h)));
  }
  return {{"kind", "scaling"},
          {"scheme", std::string(hopf::to_string(c.scheme))},
          {"columns", {"n", "chi", "deviation"}},
          {"studies", std::move(studies)}};
}

inline io::json run_preimage(const RunConfig& c) {
  const HopfParams p{c.h.front()};
  io::json out = io::json::array();
  for (const SpinTarget& t : targets(c)) {
    auto loops = preimage_contours(p, t, {c.res, kCurveTolerance, resolve_threads(c.threads)});
    if (c.embed && !loops.empty()) loops = embed_r3_common(loops, p);
    io::json curves = io::json::array();
    for (const auto& l : loops) curves.push_back(io::to_json(l));
    out.push_back({{"target", io::vec3(t.direction())}, {"loops", std::move(curves)}});
  }
  return {{"kind", "preimage"}, {"h", p.h}, {"res", c.res}, {"targets", std::move(out)}};
}

inline io::json run_neighborhood(const RunConfig& c) {
  const StateField f = load_or_sample(c);
  io::json out = io::json::array();
  for (const SpinTarget& t : targets(c)) {
    io::json sites = io::json::array();
    const auto hits = epsilon_neighborhood(f, EpsilonQuery(t, *c.epsilon));
    for (const auto& s : hits) sites.push_back({{"site", s.site}, {"j", s.j}, {"spin", io::vec3(s.spin)}});
    out.push_back({{"target", io::vec3(t.direction())}, {"count", hits.size()}, {"sites", std::move(sites)}});
  }
  return {{"kind", "neighborhood"}, {"h", f.params().h}, {"n", f.mesh().n},
          {"epsilon", *c.epsilon},  {"targets", std::move(out)}};
}

inline io::json run_link(const RunConfig& c) {
  const auto t = targets(c);
  io::json j = io::to_json(link_matrix({c.h.front()}, t, {c.res, kCurveTolerance, resolve_threads(c.threads)}));
  j["res"] = c.res;
  return j;
}

inline io::json run_adiabatic(const RunConfig& c) {
  const HopfParams p{c.h.front()};
  const auto& f = c.k_frac;
  const MomentumPoint k = MomentumPoint::from_fractions(f[0], f[1], f[2]);
  const RampSchedule s = build_schedule(k, p);
  const Spinor final_state = evolve(s, Spinor(complex(1, 0), complex(0, 0)));
  const Spinor ideal = ground_state(k, p);
  return {{"kind", "adiabatic"},
          {"h", p.h},
          {"k_frac", f},
          {"target_control",
           {{"amplitude", s.target.amplitude}, {"phase", s.target.phase}, {"detuning", s.target.detuning}}},
          {"fidelity", state_fidelity(ideal, final_state)},
          {"final_bloch", io::vec3(bloch_vector(final_state))},
          {"ideal_bloch", io::vec3(bloch_vector(ideal))},
          {"schedule", io::to_json(s, c.stride)}};
}

inline void run_campaign_command(const RunConfig& c, std::ostream& out) {
  CampaignOptions opt;
  opt.photons_per_site = c.photons;
  opt.seed = c.seed;
  opt.threads = resolve_threads(c.threads);
  const CampaignResult r = run_campaign({c.h.front()}, MeshSpec(c.n.front()), opt);

  std::filesystem::path field_path = output_path(c).value_or("campaign.json");
  std::filesystem::path stats_path = field_path;
  stats_path.replace_filename(field_path.stem().string() + ".stats.json");

  io::write_atomic(field_path, io::dump(stamped(io::to_json(r.field))));
  io::write_atomic(stats_path, io::dump(stamped(io::campaign_stats_json(r))));
  out << "wrote " << field_path.string() << '\n' << "wrote " << stats_path.string() << '\n';
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UsageError: return 2;
    case ErrorKind::IoError: return 3;
    default: return 1;
  }
}

inline void report(std::ostream& err, const std::string& kind, const std::string& message) {
  err << io::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace detail

/// Runs the engine behind `c` and writes its artifacts.
inline void dispatch(const RunConfig& c, std::ostream& out) {
  using namespace detail;
  switch (c.command) {
    case Command::Field:
      emit(c, io::dump(stamped(io::to_json(load_or_sample(c)))), out);
      return;
    case Command::Index:
      emit(c, io::dump(stamped(run_index(c))), out);
      return;
    case Command::Chern:
      emit(c, io::dump(stamped(run_chern(c))), out);
      return;
    case Command::Scaling:
      emit(c, io::dump(stamped(run_scaling(c))), out);
      return;
    case Command::Texture: {
      const StateField f = load_or_sample(c);
      emit(c, c.format == "csv" ? io::texture_csv(f) : io::dump(stamped(io::texture_json(f))), out);
      return;
    }
    case Command::Preimage:
      emit(c, io::dump(stamped(run_preimage(c))), out);
      return;
    case Command::Neighborhood:
      emit(c, io::dump(stamped(run_neighborhood(c))), out);
      return;
    case Command::Link:
      emit(c, io::dump(stamped(run_link(c))), out);
      return;
    case Command::Adiabatic:
      emit(c, io::dump(stamped(run_adiabatic(c))), out);
      return;
    case Command::Campaign:
      run_campaign_command(c, out);
      return;
  }
}

/// Full entry point: 0 success, 1 engine error, 2 usage error, 3 I/O error.
/// Errors go to `err` as one JSON object per line.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    const RunConfig c = parse_config(argc, argv);
    dispatch(c, out);
    return 0;
  } catch (const HelpRequested& h) {
    out << h.text;
    return 0;
  } catch (const Error& e) {
    detail::report(err, std::string(hopf::to_string(e.kind())), e.what());
    return detail::exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    detail::report(err, "IoError", e.what());
    return 3;
  } catch (const std::exception& e) {
    detail::report(err, "InternalError", e.what());
    return 1;
  }
}

}  // namespace hopf::cli
