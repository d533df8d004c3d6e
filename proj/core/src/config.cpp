#include "smpler/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "smpler/errors.hpp"

namespace smpler {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ParseError("'" + key + "' expects a non-negative integer, got '" + v + "'", 0);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ParseError("'" + key + "' expects a number, got '" + v + "'", 0);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ParseError("'" + key + "' expects true/false, got '" + v + "'", 0);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {vertices, joints3d, joints2d, rotation}) {
    if (!(w >= 0.0)) throw InvariantError("loss weights are nonnegative", fmt(w));
  }
}

SmplerConfig SmplerConfig::preset(const std::string& name) {
  SmplerConfig c;
  if (name == "default") return c;
  if (name == "toy") {
    c.d = 16;
    c.r = 4;
    c.grid = 16;
    return c;
  }
  if (name == "tiny") {
    c.blocks = 1;
    c.units = 1;
    c.heads = 2;
    c.d = 8;
    c.scales = 2;
    c.r = 2;
    c.grid = 4;
    c.n_vertices = 60;
    return c;
  }
  throw InvariantError("known config preset", name);
}

void SmplerConfig::validate() const {
  if (blocks < 1 || units < 1) throw InvariantError("B >= 1 and U >= 1", "");
  if (heads == 0 || d % heads != 0) throw InvariantError("d divisible by n_heads", "");
  if (scales < 1 || scales > 16) throw InvariantError("1 <= S <= 16", std::to_string(scales));
  if (grid == 0 || grid % (std::size_t{1} << (scales - 1)) != 0) {
    throw InvariantError("h_1 divisible by 2^(S-1)", std::to_string(grid));
  }
  if (r == 0) throw InvariantError("r >= 1", "");
  if (joints != 24) throw InvariantError("H = 24", std::to_string(joints));
  if (n_vertices < joints) throw InvariantError("n_vertices >= H", std::to_string(n_vertices));
  loss.validate();
}

std::vector<GridShape> SmplerConfig::grids() const {
  std::vector<GridShape> g;
  std::size_t s = grid;
  for (std::size_t i = 0; i < scales; ++i, s /= 2) g.push_back({s, s});
  return g;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("expected key = value", pos);
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty()) throw ParseError("empty key", pos);
      out[key] = value;
    }
    pos = end + 1;
  }
  return out;
}

SmplerConfig apply_config(SmplerConfig c, const std::map<std::string, std::string>& kv) {
  if (auto it = kv.find("preset"); it != kv.end()) c = SmplerConfig::preset(it->second);
  for (const auto& [k, v] : kv) {
    if (k == "preset") continue;
    if (k == "blocks") c.blocks = parse_uint(k, v);
    else if (k == "units") c.units = parse_uint(k, v);
    else if (k == "heads") c.heads = parse_uint(k, v);
    else if (k == "d") c.d = parse_uint(k, v);
    else if (k == "scales") c.scales = parse_uint(k, v);
    else if (k == "r") c.r = parse_uint(k, v);
    else if (k == "joints") c.joints = parse_uint(k, v);
    else if (k == "grid") c.grid = parse_uint(k, v);
    else if (k == "n_vertices") c.n_vertices = parse_uint(k, v);
    else if (k == "body_seed") c.body_seed = parse_uint(k, v);
    else if (k == "intermediate_supervision") c.intermediate_supervision = parse_bool(k, v);
    else if (k == "w_Y") c.loss.vertices = parse_double(k, v);
    else if (k == "w_J") c.loss.joints3d = parse_double(k, v);
    else if (k == "w_2D") c.loss.joints2d = parse_double(k, v);
    else if (k == "w_R") c.loss.rotation = parse_double(k, v);
    else throw ParseError("unknown config key '" + k + "'", 0);
  }
  return c;
}

std::map<std::string, std::string> config_snapshot(const SmplerConfig& c) {
  return {{"blocks", std::to_string(c.blocks)},
          {"units", std::to_string(c.units)},
          {"heads", std::to_string(c.heads)},
          {"d", std::to_string(c.d)},
          {"scales", std::to_string(c.scales)},
          {"r", std::to_string(c.r)},
          {"joints", std::to_string(c.joints)},
          {"grid", std::to_string(c.grid)},
          {"n_vertices", std::to_string(c.n_vertices)},
          {"body_seed", std::to_string(c.body_seed)},
          {"intermediate_supervision", c.intermediate_supervision ? "true" : "false"},
          {"w_Y", fmt(c.loss.vertices)},
          {"w_J", fmt(c.loss.joints3d)},
          {"w_2D", fmt(c.loss.joints2d)},
          {"w_R", fmt(c.loss.rotation)}};
}

}  // namespace smpler
