#include "halfmass/metric_file.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "halfmass/error.hpp"

namespace halfmass {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double number(std::string_view s, std::size_t line, std::string_view key) {
  s = trim(s);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(line, std::string(key) + " expects a number, got '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (std::isspace(static_cast<unsigned char>(s[i])) || s[i] == ',')) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])) && s[j] != ',') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

struct Entry {
  std::string value;
  std::size_t line;
};

}  // namespace

MetricFile parse_metric_file(std::string_view text) {
  std::map<std::string, Entry, std::less<>> entries;
  std::map<std::pair<int, int>, Entry> coeffs;  // (i, j) as written, 1-based
  MetricFile f;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError(line_no, "missing key");

    if (key.size() == 3 && key[0] == 'a' && std::isdigit(static_cast<unsigned char>(key[1])) &&
        std::isdigit(static_cast<unsigned char>(key[2]))) {
      const std::pair<int, int> ij{key[1] - '0', key[2] - '0'};
      if (!coeffs.emplace(ij, Entry{value, line_no}).second)
        throw ParseError(line_no, "duplicate key " + std::string(key));
      continue;
    }
    if (key.starts_with("const")) {
      const std::string name(trim(key.substr(5)));
      if (name.empty() || !std::isalpha(static_cast<unsigned char>(name[0])))
        throw ParseError(line_no, "const needs a name");
      if (!f.constants.emplace(name, number(value, line_no, key)).second)
        throw ParseError(line_no, "duplicate constant " + name);
      continue;
    }
    static const char* known[] = {"dimension", "tau", "r0", "family", "m", "u",
                                  "flags", "schedule", "motion_seed", "motion_shift"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
    if (!entries.emplace(std::string(key), Entry{value, line_no}).second)
      throw ParseError(line_no, "duplicate key " + std::string(key));
  }
  const std::size_t last = line_no;

  auto find = [&](std::string_view k) -> const Entry* {
    const auto it = entries.find(k);
    return it == entries.end() ? nullptr : &it->second;
  };
  const Entry* dim = find("dimension");
  if (!dim) throw ParseError(last, "missing key 'dimension'");
  const double nd = number(dim->value, dim->line, "dimension");
  if (nd != static_cast<int>(nd) || nd < 3 || nd > kMaxDim)
    throw ParseError(dim->line, "dimension must be an integer in 3..7");
  f.n = static_cast<int>(nd);
  if (const Entry* e = find("tau")) f.tau = number(e->value, e->line, "tau");
  if (const Entry* e = find("r0")) f.r0 = number(e->value, e->line, "r0");
  if (const Entry* e = find("flags"))
    for (auto w : words(e->value)) {
      if (w != "conformally_flat" && w != "boundary_orthogonal")
        throw ParseError(e->line, "unknown flag '" + std::string(w) + "'");
      f.flags.emplace_back(w);
    }
  if (const Entry* e = find("schedule"))
    for (auto w : words(e->value)) f.schedule.push_back(number(w, e->line, "schedule"));
  if (const Entry* e = find("motion_seed")) {
    const double s = number(e->value, e->line, "motion_seed");
    if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s)))
      throw ParseError(e->line, "motion_seed must be a non-negative integer");
    f.motion_seed = static_cast<std::uint64_t>(s);
  }
  if (const Entry* e = find("motion_shift")) f.motion_shift = number(e->value, e->line, "motion_shift");

  const Entry* fam = find("family");
  if (!fam) throw ParseError(last, "missing key 'family'");
  f.family = fam->value;
  auto expression = [&](const Entry& e, std::string_view key) {
    try {
      return Expression::parse(e.value, f.n, f.constants);
    } catch (const ParseError& err) {
      throw ParseError(e.line, std::string(key) + ": " + err.detail() + " (column " +
                                   std::to_string(err.position() + 1) + ")");
    }
  };
  auto forbid = [&](std::string_view key) {
    if (const Entry* e = find(key))
      throw ParseError(e->line, "key '" + std::string(key) + "' does not belong to family " + f.family);
  };

  if (f.family == "flat") {
    forbid("m");
    forbid("u");
  } else if (f.family == "half_schwarzschild") {
    forbid("u");
    const Entry* e = find("m");
    if (!e) throw ParseError(fam->line, "family half_schwarzschild needs m");
    f.m = number(e->value, e->line, "m");
  } else if (f.family == "conformal") {
    forbid("m");
    const Entry* e = find("u");
    if (!e) throw ParseError(fam->line, "family conformal needs u");
    expression(*e, "u");
    f.u = e->value;
  } else if (f.family == "perturbation") {
    forbid("m");
    forbid("u");
  } else {
    throw ParseError(fam->line, "unknown family '" + f.family + "'");
  }
  if (f.family != "perturbation" && !coeffs.empty())
    throw ParseError(coeffs.begin()->second.line, "coefficients a_ij belong to family perturbation");

  if (f.family == "perturbation") {
    f.a.assign(static_cast<std::size_t>(packed_size(f.n)), "");
    for (const auto& [ij, e] : coeffs) {
      const auto [i, j] = ij;
      if (i < 1 || j < 1 || i > f.n || j > f.n)
        throw ParseError(e.line, "coefficient index out of range for dimension " + std::to_string(f.n));
      const Expression ex = expression(e, "a" + std::to_string(i) + std::to_string(j));
      if (i > j) {
        const auto twin = coeffs.find({j, i});
        if (twin != coeffs.end() && !(expression(twin->second, "a") == ex))
          throw ParseError(e.line, "a" + std::to_string(i) + std::to_string(j) + " differs from a" +
                                       std::to_string(j) + std::to_string(i) + ": the metric must be symmetric");
      }
      std::string& slot = f.a[static_cast<std::size_t>(packed_index(i - 1, j - 1))];
      if (slot.empty()) slot = e.value;
    }
    if (!f.tau) throw ParseError(fam->line, "family perturbation needs tau");
  }
  return f;
}

MetricFile load_metric_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open metric file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_metric_file(os.str());
}

MetricField build_metric(const MetricFile& f) {
  MetricField g;
  if (f.family == "flat") {
    g = flat_half_space(f.n);
  } else if (f.family == "half_schwarzschild") {
    g = half_schwarzschild(f.n, f.m);
  } else if (f.family == "conformal") {
    g = conformal(flat_half_space(f.n), ScalarField::parse(f.u, f.n, f.constants));
  } else {
    std::vector<ScalarField> a(static_cast<std::size_t>(packed_size(f.n)));
    for (std::size_t k = 0; k < a.size(); ++k)
      if (!f.a[k].empty()) a[k] = ScalarField::parse(f.a[k], f.n, f.constants);
    g = perturbation(f.n, a, *f.tau, f.r0.value_or(1.0));
  }
  if (f.tau) g.tau = *f.tau;
  if (f.r0) g.r0 = *f.r0;
  for (const auto& fl : f.flags) {
    if (fl == "conformally_flat") g.conformally_flat = true;
    if (fl == "boundary_orthogonal") g.boundary_orthogonal = true;
  }
  if (f.motion_seed) {
    const RigidMotion rm = random_rigid_motion(f.n, *f.motion_seed, f.motion_shift);
    g = pullback_rigid(g, rm.q, rm.b);
  }
  return g;
}

}  // namespace halfmass
