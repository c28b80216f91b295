#include "flowlut/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string_view>

#include "flowlut/errors.hpp"

namespace flowlut {

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw UsageError("invalid config: " + m); };
  if (num_luts < 1) fail("num_luts must be >= 1");
  if (lattice_size < 2) fail("lattice_size must be >= 2");
  if (flow_steps < 1) fail("flow_steps must be >= 1");
  if (!(lr >= 0.0)) fail("lr must be >= 0");
  if (!(lambda_perceptual >= 0.0)) fail("lambda_perceptual must be >= 0");
  if (wg_c1 == 0 || wg_c2 == 0 || wg_c3 == 0 || head_hidden == 0 || flow_width == 0) {
    fail("network widths must be positive");
  }
  if (analysis_height < 8 || analysis_width < 8) fail("analysis resolution must be >= 8x8");
  if ((processing_height == 0) != (processing_width == 0)) {
    fail("processing resolution needs both height and width (or neither)");
  }
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0,1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UsageError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  auto size = [&](std::size_t& f) { f = parse_number<std::size_t>(key, value); };
  auto real = [&](double& f) { f = parse_number<double>(key, value); };
  const std::map<std::string, std::function<void()>> setters = {
      {"num_luts", [&] { size(num_luts); }},
      {"lattice_size", [&] { size(lattice_size); }},
      {"flow_steps", [&] { size(flow_steps); }},
      {"specialized_init", [&] { specialized_init = parse_bool(key, value); }},
      {"wg_c1", [&] { size(wg_c1); }},
      {"wg_c2", [&] { size(wg_c2); }},
      {"wg_c3", [&] { size(wg_c3); }},
      {"head_hidden", [&] { size(head_hidden); }},
      {"flow_width", [&] { size(flow_width); }},
      {"analysis_height", [&] { size(analysis_height); }},
      {"analysis_width", [&] { size(analysis_width); }},
      {"processing_height", [&] { size(processing_height); }},
      {"processing_width", [&] { size(processing_width); }},
      {"lambda_perceptual", [&] { real(lambda_perceptual); }},
      {"lr", [&] { real(lr); }},
      {"beta1", [&] { real(beta1); }},
      {"beta2", [&] { real(beta2); }},
      {"eps", [&] { real(eps); }},
      {"weight_decay", [&] { real(weight_decay); }},
      {"epochs", [&] { size(epochs); }},
      {"batch_size", [&] { size(batch_size); }},
      {"seed", [&] { seed = parse_number<std::uint64_t>(key, value); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw UsageError("unknown config key '" + key + "'");
  it->second();
}

std::map<std::string, std::string> PipelineConfig::to_map() const {
  return {
      {"num_luts", std::to_string(num_luts)},
      {"lattice_size", std::to_string(lattice_size)},
      {"flow_steps", std::to_string(flow_steps)},
      {"specialized_init", specialized_init ? "true" : "false"},
      {"wg_c1", std::to_string(wg_c1)},
      {"wg_c2", std::to_string(wg_c2)},
      {"wg_c3", std::to_string(wg_c3)},
      {"head_hidden", std::to_string(head_hidden)},
      {"flow_width", std::to_string(flow_width)},
      {"analysis_height", std::to_string(analysis_height)},
      {"analysis_width", std::to_string(analysis_width)},
      {"processing_height", std::to_string(processing_height)},
      {"processing_width", std::to_string(processing_width)},
      {"lambda_perceptual", fmt_double(lambda_perceptual)},
      {"lr", fmt_double(lr)},
      {"beta1", fmt_double(beta1)},
      {"beta2", fmt_double(beta2)},
      {"eps", fmt_double(eps)},
      {"weight_decay", fmt_double(weight_decay)},
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"seed", std::to_string(seed)},
  };
}

PipelineConfig load_config_file(const std::string& path, PipelineConfig base) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(f, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'key = value'", line_no);
    }
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

}  // namespace flowlut
