#include <cmath>
#include <set>

#include "cli.hpp"
#include "pertasym/error.hpp"
#include "pertasym/io.hpp"

namespace cli {

using pertasym::ErrorKind;
using pertasym::fail;

namespace {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Number: return "a number";
    case Kind::Integer: return "an integer";
    case Kind::Unsigned: return "a non-negative integer";
    case Kind::Bool: return "a boolean";
    case Kind::String: return "a string";
    case Kind::Object: return "an object";
    case Kind::Array: return "an array";
    case Kind::NumberArray: return "an array of numbers";
  }
  return "?";
}

bool matches(const json& v, Kind k) {
  switch (k) {
    case Kind::Number: return v.is_number() && std::isfinite(v.get<double>());
    case Kind::Integer: return v.is_number_integer();
    case Kind::Unsigned: return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    case Kind::Bool: return v.is_boolean();
    case Kind::String: return v.is_string();
    case Kind::Object: return v.is_object();
    case Kind::Array: return v.is_array();
    case Kind::NumberArray:
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!e.is_number() || !std::isfinite(e.get<double>())) return false;
      return true;
  }
  return false;
}

}  // namespace

void validate(const json& j, std::initializer_list<Field> fields, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::Config, where + " must be a JSON object");
  std::set<std::string> known;
  for (const auto& f : fields) {
    known.insert(f.key);
    if (!j.contains(f.key)) {
      if (f.required) fail(ErrorKind::Config, where + ": missing required key \"" + f.key + "\"");
      continue;
    }
    if (!matches(j.at(f.key), f.kind))
      fail(ErrorKind::Config, where + ": \"" + f.key + "\" must be " + kind_name(f.kind));
  }
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) fail(ErrorKind::Config, where + ": unknown key \"" + k + "\"");
}

double number(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

std::vector<double> number_array(const json& j, const char* key) {
  return j.at(key).get<std::vector<double>>();
}

pertasym::EquationOfState parse_eos(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    fail(ErrorKind::Config, "eos: needs a string \"type\" (linear, power_law, polytropic)");
  const std::string type = j.at("type");
  try {
    if (type == "linear") {
      validate(j, {{"type", Kind::String, true}, {"w", Kind::Number, true}}, "eos");
      return pertasym::EquationOfState::linear(j.at("w"));
    }
    if (type == "power_law") {
      validate(j, {{"type", Kind::String, true}, {"w", Kind::Number, true}, {"terms", Kind::Array, true}},
               "eos");
      std::vector<pertasym::PowerLawTerm> terms;
      for (const auto& t : j.at("terms")) {
        validate(t, {{"f", Kind::Number, true}, {"a", Kind::Number, true}}, "eos.terms[]");
        terms.push_back({t.at("f"), t.at("a")});
      }
      return pertasym::EquationOfState::power_law(j.at("w"), terms);
    }
    if (type == "polytropic") {
      validate(j, {{"type", Kind::String, true}, {"K", Kind::Number, true}, {"n", Kind::Number, true}},
               "eos");
      return pertasym::EquationOfState::polytropic(j.at("K"), j.at("n"));
    }
  } catch (const pertasym::Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    fail(ErrorKind::Config, std::string("eos: ") + e.what());
  }
  fail(ErrorKind::Config, "eos: unknown type \"" + type + "\" (linear, power_law, polytropic)");
}

pertasym::TorusGeometry parse_geometry(const json& j) {
  validate(j, {{"N", Kind::Integer, true}, {"L", Kind::Number}}, "geometry");
  pertasym::TorusGeometry g;
  g.N = j.at("N");
  g.L = number(j, "L", g.L);
  try {
    g.validate();
  } catch (const pertasym::Error& e) {
    fail(ErrorKind::Config, std::string("geometry: ") + e.what());
  }
  return g;
}

void validate_field_spec(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    fail(ErrorKind::Config, where + ": needs a string \"type\" (random, modes, file)");
  const std::string type = j.at("type");
  if (type == "random") {
    validate(j,
             {{"type", Kind::String, true},
              {"kmax", Kind::Integer},
              {"amplitude", Kind::Number},
              {"zero_mean", Kind::Bool}},
             where);
  } else if (type == "modes") {
    validate(j, {{"type", Kind::String, true}, {"modes", Kind::Array, true}}, where);
    for (const auto& m : j.at("modes")) {
      validate(m, {{"n", Kind::NumberArray, true}, {"value", Kind::NumberArray, true}}, where + ".modes[]");
      if (m.at("n").size() != 3 || m.at("value").size() != 2)
        fail(ErrorKind::Config, where + ".modes[]: n needs 3 integers and value [re, im]");
    }
  } else if (type == "file") {
    validate(j, {{"type", Kind::String, true}, {"path", Kind::String, true}}, where);
  } else {
    fail(ErrorKind::Config, where + ": unknown type \"" + type + "\" (random, modes, file)");
  }
}

pertasym::SpectralField build_field(const json& j, const pertasym::TorusGeometry& g,
                                    std::mt19937_64& rng, bool zero_mean_default) {
  const std::string type = j.at("type");
  if (type == "random") {
    const int kmax = j.value("kmax", 4);
    if (kmax < 0 || kmax > g.half())
      fail(ErrorKind::Config, "random field: kmax must lie in [0, " + std::to_string(g.half()) + "]");
    return pertasym::random_field(g, rng, kmax, number(j, "amplitude", 1.0),
                                  j.value("zero_mean", zero_mean_default));
  }
  if (type == "modes") {
    pertasym::SpectralField f(g);
    for (const auto& m : j.at("modes")) {
      const auto n = m.at("n").get<std::vector<double>>();
      const auto v = m.at("value").get<std::vector<double>>();
      int k[3];
      for (int c = 0; c < 3; ++c) {
        k[c] = static_cast<int>(n[c]);
        if (k[c] != n[c] || std::abs(k[c]) > g.half())
          fail(ErrorKind::Config, "modes: wave numbers must be integers within the grid");
      }
      f.set_mode(k[0], k[1], k[2], {v[0], v[1]});
    }
    return f;
  }
  auto f = pertasym::read_spectral(j.at("path").get<std::string>());
  if (!(f.geometry() == g)) fail(ErrorKind::Config, "field file geometry does not match the config");
  return f;
}

}  // namespace cli
