#pragma once

#include <cstdint>
#include <initializer_list>
#include <json.hpp>
#include <optional>
#include <random>
#include <string>

#include "pertasym/eos.hpp"
#include "pertasym/evolver.hpp"
#include "pertasym/spectral.hpp"

namespace cli {

using nlohmann::json;
using nlohmann::ordered_json;

struct Context {
  json config;
  std::string out;
  std::uint64_t seed = 0;
};

// Schema checks. All throw a config error naming the offending key.
enum class Kind { Number, Integer, Unsigned, Bool, String, Object, Array, NumberArray };
struct Field {
  const char* key;
  Kind kind;
  bool required = false;
};
void validate(const json& j, std::initializer_list<Field> fields, const std::string& where);

double number(const json& j, const char* key, double fallback);
pertasym::EquationOfState parse_eos(const json& j);
pertasym::TorusGeometry parse_geometry(const json& j);

// Checks an initial-field spec without building it:
// {"type": "random", "kmax", "amplitude", "zero_mean"} | {"type": "modes", "modes": [{"n", "value"}]}
// | {"type": "file", "path"}
void validate_field_spec(const json& j, const std::string& where);
pertasym::SpectralField build_field(const json& j, const pertasym::TorusGeometry& g,
                                    std::mt19937_64& rng, bool zero_mean_default = false);

std::vector<double> number_array(const json& j, const char* key);

void cmd_bg(const Context& c);
void cmd_evolve(const Context& c);
void cmd_sing(const Context& c, const std::string& mode);
void cmd_late(const Context& c, const std::string& mode);
void cmd_classify(const Context& c);
void cmd_gowdy(const Context& c);

}  // namespace cli
