#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "divctl/engine.hpp"
#include "divctl/json_io.hpp"
#include "divctl/metrics.hpp"
#include "divctl/sampler.hpp"

namespace divctl {

struct ScenarioAttribute {
  std::string name;
  std::optional<std::vector<std::string>> labels;  ///< suggested by the language model when absent
  std::optional<std::vector<double>> target;       ///< weights; absent keeps the uniform default
  bool balance = false;
};

struct Scenario {
  std::string name;
  std::string context;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  SamplingMode mode = SamplingMode::Quota;
  std::size_t iterations = 1;
  double mock_q = 1.0;
  double mock_sigma = 0.0;
  std::vector<ScenarioAttribute> attributes;
};

namespace scenario_detail {

[[noreturn]] inline void bad(const std::string& why) { fail(Errc::ScenarioParseError, why); }

inline void only_fields(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) bad(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) bad("unknown field '" + key + "' in " + where);
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad("missing field '" + std::string(key) + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad("field '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

}  // namespace scenario_detail

inline Scenario parse_scenario(const std::string& text, std::size_t max_n = 200) {
  using namespace scenario_detail;
  auto j = json::parse(text, nullptr, false, true);
  if (j.is_discarded()) bad("scenario is not valid JSON");
  only_fields(j, {"name", "context", "n", "seed", "mode", "iterations", "mock", "attributes"}, "scenario");
  Scenario s;
  s.name = field<std::string>(j, "name", "scenario");
  s.context = field<std::string>(j, "context", "scenario");
  if (trim(s.context).empty()) bad("context is empty");
  if (!j.contains("n") || !j["n"].is_number_unsigned()) bad("n must be a positive integer");
  s.n = j["n"].get<std::size_t>();
  if (s.n < 1 || s.n > max_n) bad("n must be in [1, " + std::to_string(max_n) + "]");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad("seed must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("mode")) {
    auto m = field<std::string>(j, "mode", "scenario");
    if (m != "quota" && m != "iid") bad("mode must be 'quota' or 'iid'");
    s.mode = sampling_mode_from(m);
  }
  if (j.contains("iterations")) {
    if (!j["iterations"].is_number_unsigned()) bad("iterations must be a non-negative integer");
    s.iterations = j["iterations"].get<std::size_t>();
  }
  if (j.contains("mock")) {
    only_fields(j["mock"], {"q", "sigma"}, "mock");
    if (j["mock"].contains("q")) s.mock_q = field<double>(j["mock"], "q", "mock");
    if (j["mock"].contains("sigma")) s.mock_sigma = field<double>(j["mock"], "sigma", "mock");
    if (!(s.mock_q >= 0 && s.mock_q <= 1)) bad("mock.q must lie in [0,1]");
    if (!(s.mock_sigma >= 0) || !std::isfinite(s.mock_sigma)) bad("mock.sigma must be non-negative");
  }
  if (j.contains("attributes")) {
    if (!j["attributes"].is_array()) bad("attributes must be an array");
    std::set<std::string> seen;
    for (const auto& a : j["attributes"]) {
      only_fields(a, {"name", "labels", "target"}, "attribute");
      ScenarioAttribute attr;
      attr.name = trim(field<std::string>(a, "name", "attribute"));
      if (attr.name.empty()) bad("attribute name is empty");
      if (!seen.insert(to_lower(attr.name)).second) bad("attribute '" + attr.name + "' repeated");
      if (a.contains("labels")) attr.labels = field<std::vector<std::string>>(a, "labels", "attribute " + attr.name);
      if (a.contains("target")) {
        if (a["target"].is_string()) {
          if (a["target"] != "balance") bad("target of " + attr.name + " must be weights or \"balance\"");
          attr.balance = true;
        } else {
          attr.target = field<std::vector<double>>(a, "target", "attribute " + attr.name);
          if (!attr.labels) bad("explicit target of " + attr.name + " needs explicit labels");
          if (attr.target->size() != attr.labels->size())
            bad("target of " + attr.name + " has " + std::to_string(attr.target->size()) + " weights for " +
                std::to_string(attr.labels->size()) + " labels");
        }
      }
      s.attributes.push_back(std::move(attr));
    }
  }
  return s;
}

inline Scenario load_scenario(const std::string& path, std::size_t max_n = 200) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::ScenarioParseError, "cannot read scenario file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), max_n);
}

/// Everything a report states. Alignment columns are derived from counts and
/// targets when rendering, so a parsed report can be re-checked.
struct Report {
  struct Attribute {
    std::string name;
    std::vector<std::string> labels;
    std::vector<double> target;
    std::size_t modifications = 0;
  };
  struct Iteration {
    std::size_t index = 0;
    std::optional<std::size_t> parent;
    double span = 0.0;
    std::map<std::string, std::vector<std::size_t>> counts;
  };
  struct AlignmentRow {
    std::size_t iteration = 0;
    std::string attribute;
    double target = 0, quota = 0, uniform = 0;
  };

  std::string scenario;
  std::string context;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string mode;
  double mock_q = 1.0;
  double mock_sigma = 0.0;
  std::vector<Attribute> attributes;
  std::vector<Iteration> iterations;
  std::vector<AlignmentRow> alignments;  ///< as printed; filled by parse_report
};

/// Target after largest-remainder rounding to `n` images.
inline std::vector<double> quota_target(std::span<const double> target, std::size_t n) {
  auto seats = largest_remainder(target, n);
  std::vector<double> out;
  for (auto s : seats) out.push_back(static_cast<double>(s) / static_cast<double>(n));
  return out;
}

inline Report::AlignmentRow compute_alignment(const Report& r, const Report::Attribute& a, std::size_t iteration,
                                              const std::vector<std::size_t>& counts) {
  std::vector<double> raw(counts.begin(), counts.end());
  auto measured = normalize(raw);
  auto q = quota_target(a.target, r.n);
  Report::AlignmentRow row;
  row.iteration = iteration;
  row.attribute = a.name;
  row.target = alignment(measured, normalize(a.target));
  row.quota = alignment(measured, normalize(q));
  row.uniform = alignment(measured, Distribution::uniform(a.labels.size()));
  return row;
}

namespace scenario_detail {
inline std::string num(double v, const char* fmt = "%.9f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}
inline std::string exact(double v) { return num(v, "%.17g"); }

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t i = 0;
  for (;;) {
    auto j = s.find(sep, i);
    out.push_back(s.substr(i, j == std::string::npos ? std::string::npos : j - i));
    if (j == std::string::npos) return out;
    i = j + 1;
  }
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) out += (c == '\t' || c == '\n') ? ' ' : c;
  return out;
}
}  // namespace scenario_detail

/// Tab-separated report with `[section]` headers.
inline std::string render_report(const Report& r) {
  using scenario_detail::escape;
  using scenario_detail::exact;
  using scenario_detail::num;
  std::ostringstream out;
  out << "[scenario]\n";
  out << "name\t" << escape(r.scenario) << "\n";
  out << "context\t" << escape(r.context) << "\n";
  out << "n\t" << r.n << "\n";
  out << "seed\t" << r.seed << "\n";
  out << "mode\t" << r.mode << "\n";
  out << "mock_q\t" << exact(r.mock_q) << "\n";
  out << "mock_sigma\t" << exact(r.mock_sigma) << "\n";

  out << "\n[iterations]\niteration\tparent\tspan\n";
  for (const auto& it : r.iterations)
    out << it.index << "\t" << (it.parent ? std::to_string(*it.parent) : "-") << "\t" << num(it.span) << "\n";

  out << "\n[alignment]\niteration\tattribute\talignment\talignment_quota\talignment_uniform\n";
  for (const auto& it : r.iterations)
    for (const auto& a : r.attributes) {
      auto c = it.counts.find(a.name);
      if (c == it.counts.end()) continue;
      auto row = compute_alignment(r, a, it.index, c->second);
      out << it.index << "\t" << escape(a.name) << "\t" << num(row.target) << "\t" << num(row.quota) << "\t"
          << num(row.uniform) << "\n";
    }

  out << "\n[targets]\nattribute\tlabel\ttarget\tquota_count\n";
  for (const auto& a : r.attributes) {
    auto seats = largest_remainder(a.target, r.n);
    for (std::size_t i = 0; i < a.labels.size(); ++i)
      out << escape(a.name) << "\t" << escape(a.labels[i]) << "\t" << exact(a.target[i]) << "\t" << seats[i] << "\n";
  }

  out << "\n[counts]\niteration\tattribute\tlabel\tcount\n";
  for (const auto& it : r.iterations)
    for (const auto& a : r.attributes) {
      auto c = it.counts.find(a.name);
      if (c == it.counts.end()) continue;
      for (std::size_t i = 0; i < a.labels.size(); ++i)
        out << it.index << "\t" << escape(a.name) << "\t" << escape(a.labels[i]) << "\t" << c->second[i] << "\n";
    }

  out << "\n[modifications]\nattribute\tcount\n";
  for (const auto& a : r.attributes) out << escape(a.name) << "\t" << a.modifications << "\n";
  return out.str();
}

inline Report parse_report(const std::string& text) {
  using scenario_detail::split;
  auto bad = [](const std::string& why) -> void { fail(Errc::ScenarioParseError, "report: " + why); };
  Report r;
  std::string section;
  bool header_row = false;
  std::istringstream in(text);
  std::map<std::string, std::size_t> attr_index;
  auto attribute = [&](const std::string& name) -> Report::Attribute& {
    auto it = attr_index.find(name);
    if (it == attr_index.end()) {
      attr_index[name] = r.attributes.size();
      r.attributes.push_back({name, {}, {}, 0});
      return r.attributes.back();
    }
    return r.attributes[it->second];
  };
  auto iteration = [&](std::size_t k) -> Report::Iteration& {
    for (auto& it : r.iterations)
      if (it.index == k) return it;
    bad("counts for unknown iteration " + std::to_string(k));
    throw;
  };
  try {
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      if (line.front() == '[') {
        section = line;
        header_row = section != "[scenario]";
        continue;
      }
      if (header_row) {
        header_row = false;
        continue;
      }
      auto f = split(line, '\t');
      if (section == "[scenario]") {
        if (f.size() != 2) bad("malformed scenario line");
        if (f[0] == "name") r.scenario = f[1];
        else if (f[0] == "context") r.context = f[1];
        else if (f[0] == "n") r.n = std::stoull(f[1]);
        else if (f[0] == "seed") r.seed = std::stoull(f[1]);
        else if (f[0] == "mode") r.mode = f[1];
        else if (f[0] == "mock_q") r.mock_q = std::stod(f[1]);
        else if (f[0] == "mock_sigma") r.mock_sigma = std::stod(f[1]);
        else bad("unknown scenario key " + f[0]);
      } else if (section == "[iterations]") {
        if (f.size() != 3) bad("malformed iteration line");
        Report::Iteration it;
        it.index = std::stoull(f[0]);
        if (f[1] != "-") it.parent = std::stoull(f[1]);
        it.span = std::stod(f[2]);
        r.iterations.push_back(std::move(it));
      } else if (section == "[alignment]") {
        if (f.size() != 5) bad("malformed alignment line");
        r.alignments.push_back({std::stoull(f[0]), f[1], std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
      } else if (section == "[targets]") {
        if (f.size() != 4) bad("malformed target line");
        auto& a = attribute(f[0]);
        a.labels.push_back(f[1]);
        a.target.push_back(std::stod(f[2]));
      } else if (section == "[counts]") {
        if (f.size() != 4) bad("malformed count line");
        iteration(std::stoull(f[0])).counts[f[1]].push_back(std::stoull(f[3]));
      } else if (section == "[modifications]") {
        if (f.size() != 2) bad("malformed modification line");
        attribute(f[0]).modifications = std::stoull(f[1]);
      } else {
        bad("line outside any known section");
      }
    }
  } catch (const std::logic_error&) {
    fail(Errc::ScenarioParseError, "report: malformed number");
  }
  if (r.n == 0) bad("missing scenario header");
  return r;
}

/// Recomputes every printed alignment from the printed counts and targets.
/// Returns the first disagreement, or nothing when the report is consistent.
inline std::optional<std::string> check_report(const Report& r, double tolerance = 2e-9) {
  std::size_t expected_rows = 0;
  for (const auto& it : r.iterations)
    for (const auto& a : r.attributes) {
      auto c = it.counts.find(a.name);
      if (c == it.counts.end()) continue;
      ++expected_rows;
      if (c->second.size() != a.labels.size()) return "count row length differs for " + a.name;
      std::size_t total = 0;
      for (auto v : c->second) total += v;
      if (total != r.n) return "counts of " + a.name + " do not sum to n";
      auto want = compute_alignment(r, a, it.index, c->second);
      bool found = false;
      for (const auto& row : r.alignments) {
        if (row.iteration != it.index || row.attribute != a.name) continue;
        found = true;
        if (std::abs(row.target - want.target) > tolerance || std::abs(row.quota - want.quota) > tolerance ||
            std::abs(row.uniform - want.uniform) > tolerance)
          return "alignment of " + a.name + " at iteration " + std::to_string(it.index) + " disagrees with its counts";
      }
      if (!found) return "alignment row missing for " + a.name;
    }
  if (expected_rows != r.alignments.size()) return "unexpected alignment rows";
  return std::nullopt;
}

/// Executes a scenario: create, add attributes, set targets, then regenerate
/// `iterations` times.
inline Report run_scenario(const Scenario& sc, GatewayConfig gateway, EngineConfig config = {}) {
  if (gateway.backend == BackendKind::Mock) {
    gateway.mock_q = sc.mock_q;
    gateway.mock_sigma = sc.mock_sigma;
    gateway.mock_seed = sc.seed;
  }
  config.mode = sc.mode;
  Engine engine(make_gateway(gateway), config);
  auto id = engine.create_session(sc.context, sc.n, sc.seed);
  for (const auto& a : sc.attributes) engine.add_attribute(id, a.name, a.labels);
  for (const auto& a : sc.attributes) {
    if (a.balance) engine.balance(id, a.name);
    if (a.target) engine.set_distribution(id, a.name, *a.target);
  }
  for (std::size_t k = 1; k <= sc.iterations; ++k) engine.regenerate(id, combine64(sc.seed, k));

  return engine.read(id, [&](const Session& s) {
    Report r;
    r.scenario = sc.name;
    r.context = s.context;
    r.n = s.n;
    r.seed = sc.seed;
    r.mode = to_string(sc.mode);
    r.mock_q = gateway.backend == BackendKind::Mock ? sc.mock_q : 1.0;
    r.mock_sigma = gateway.backend == BackendKind::Mock ? sc.mock_sigma : 0.0;
    std::map<std::string, std::size_t> mods;
    for (const auto& line : s.log) {
      auto j = json::parse(line);
      static const std::set<std::string> edits{"set_distribution", "set_weight", "balance", "add_label", "remove_label"};
      if (edits.count(j["op"].get<std::string>())) ++mods[to_lower(j["name"].get<std::string>())];
    }
    for (const auto& spec : s.attributes) {
      Report::Attribute a;
      a.name = spec.name();
      for (const auto& l : spec.labels()) a.labels.push_back(l.text());
      a.target.assign(spec.target().weights().begin(), spec.target().weights().end());
      a.modifications = mods[to_lower(spec.name())];
      r.attributes.push_back(std::move(a));
    }
    for (const auto& snap : s.iterations) {
      Report::Iteration it;
      it.index = snap.index;
      it.parent = snap.parent;
      std::vector<EmbeddingVector> e;
      for (const auto& img : snap.images) e.push_back(img.embedding);
      it.span = span(e);
      for (const auto& [name, m] : snap.measured) it.counts[name] = m.counts;
      r.iterations.push_back(std::move(it));
    }
    auto text = render_report(r);
    return parse_report(text);
  });
}

/// Side-by-side table of the final iteration of each report.
inline std::string compare_reports(const std::vector<Report>& reports, const std::vector<std::string>& names) {
  if (reports.size() < 2) fail(Errc::InvalidArgument, "compare needs at least two reports");
  auto identity = [](const Report& r) {
    std::string id = r.context + "\n" + std::to_string(r.n) + "\n" + r.mode;
    for (const auto& a : r.attributes) {
      id += "\n" + to_lower(a.name) + ":";
      for (const auto& l : a.labels) id += to_lower(l) + ",";
    }
    return id;
  };
  for (std::size_t i = 1; i < reports.size(); ++i)
    if (identity(reports[i]) != identity(reports[0]))
      fail(Errc::MismatchedScenarios, "report " + names[i] + " describes a different scenario than " + names[0]);
  for (const auto& r : reports)
    if (r.iterations.empty()) fail(Errc::ScenarioParseError, "report without iterations");

  using scenario_detail::num;
  std::ostringstream out;
  out << "metric";
  for (const auto& name : names) out << "\t" << name;
  out << "\n";
  out << "span";
  for (const auto& r : reports) out << "\t" << num(r.iterations.back().span);
  out << "\n";
  auto final_row = [](const Report& r, const std::string& attr) -> const Report::AlignmentRow* {
    const Report::AlignmentRow* found = nullptr;
    for (const auto& row : r.alignments)
      if (row.iteration == r.iterations.back().index && iequals(row.attribute, attr)) found = &row;
    return found;
  };
  for (const auto& a : reports[0].attributes) {
    for (const char* kind : {"alignment", "alignment_quota", "alignment_uniform"}) {
      out << kind << "[" << a.name << "]";
      for (const auto& r : reports) {
        auto row = final_row(r, a.name);
        if (!row) {
          out << "\t-";
          continue;
        }
        std::string k = kind;
        out << "\t" << num(k == "alignment" ? row->target : k == "alignment_quota" ? row->quota : row->uniform);
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace divctl
