#include "planefield/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "planefield/errors.hpp"

namespace planefield {

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ContractViolation(std::string("config: ") + name + " must be positive");
  };
  positive(iters, "iters");
  positive(batch_rays, "batch_rays");
  positive(feat_dim, "feat_dim");
  positive(sampler_window, "sampler_window");
  positive(decoder_width, "decoder_width");
  positive(samplenet_width, "samplenet_width");
  if (oneblob_bins < 2) throw ContractViolation("config: oneblob_bins must be at least 2");
  if (n_coarse < 2 || n_fine < 2) throw ContractViolation("config: n_coarse and n_fine must be at least 2");
  if (!(lr_init > 0)) throw ContractViolation("config: lr_init must be positive");
  if (lr_warmup_iters >= iters) throw ContractViolation("config: lr_warmup_iters must be below iters");
  if (!(huber_delta > 0)) throw ContractViolation("config: huber_delta must be positive");
  if (!(sampler_alpha > 0) || !(sampler_beta > 0))
    throw ContractViolation("config: sampler_alpha and sampler_beta must be positive");
  if (resolutions.empty()) throw ContractViolation("config: resolutions must not be empty");
  for (std::size_t i = 0; i < resolutions.size(); ++i)
    if (resolutions[i] < 2 || (i > 0 && resolutions[i] <= resolutions[i - 1]))
      throw ContractViolation("config: resolutions must be >= 2 and strictly increasing");
  for (auto r : samplenet_resolutions)
    if (r < 2) throw ContractViolation("config: samplenet_resolutions must be >= 2");
  loss.validate();
}

TrainConfig preset_config(Preset preset) {
  TrainConfig c;
  c.iters = preset == Preset::Iters9k ? 9000 : 32000;
  return c;
}

ConfigEntries parse_config_text(const std::string& text) {
  ConfigEntries out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractViolation("config line " + std::to_string(lineno) + ": expected key = value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ContractViolation("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ContractViolation("config: " + key + " expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ContractViolation("config: " + key + " expects true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw ContractViolation("config: empty list item in '" + key + "'");
    out.push_back(parse_size(key, item.substr(b, e - b + 1)));
  }
  return out;
}

std::string format_double(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field size_field(T TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = static_cast<T>(parse_size(k, v)); },
          [m](const TrainConfig& c) { return std::to_string(c.*m); }};
}
Field double_field(double TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); },
          [m](const TrainConfig& c) { return format_double(c.*m); }};
}
Field loss_field(double LossWeights::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.loss.*m = parse_double(k, v); },
          [m](const TrainConfig& c) { return format_double(c.loss.*m); }};
}
Field bool_field(bool TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); },
          [m](const TrainConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}
Field list_field(std::vector<std::size_t> TrainConfig::*m) {
  return {[m](TrainConfig& c, const std::string& k, const std::string& v) { c.*m = parse_list(k, v); },
          [m](const TrainConfig& c) { return format_list(c.*m); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"iters", size_field(&TrainConfig::iters)},
      {"batch_rays", size_field(&TrainConfig::batch_rays)},
      {"lr_init", double_field(&TrainConfig::lr_init)},
      {"lr_warmup_iters", size_field(&TrainConfig::lr_warmup_iters)},
      {"feat_dim", size_field(&TrainConfig::feat_dim)},
      {"oneblob_bins", size_field(&TrainConfig::oneblob_bins)},
      {"huber_delta", double_field(&TrainConfig::huber_delta)},
      {"sampler_alpha", double_field(&TrainConfig::sampler_alpha)},
      {"sampler_beta", double_field(&TrainConfig::sampler_beta)},
      {"sampler_window", size_field(&TrainConfig::sampler_window)},
      {"sampler_mode",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          if (v == "lower_bound") c.sampler_mode = AlphaMode::LowerBound;
          else if (v == "cap") c.sampler_mode = AlphaMode::Cap;
          else throw ContractViolation("config: " + k + " expects lower_bound or cap, got '" + v + "'");
        },
        [](const TrainConfig& c) {
          return std::string(c.sampler_mode == AlphaMode::LowerBound ? "lower_bound" : "cap");
        }}},
      {"resolutions", list_field(&TrainConfig::resolutions)},
      {"samplenet_resolutions", list_field(&TrainConfig::samplenet_resolutions)},
      {"n_coarse", size_field(&TrainConfig::n_coarse)},
      {"n_fine", size_field(&TrainConfig::n_fine)},
      {"w_color", loss_field(&LossWeights::w_color)},
      {"w_depth", loss_field(&LossWeights::w_depth)},
      {"w_tv_space", loss_field(&LossWeights::w_tv_space)},
      {"w_tv_spacetime", loss_field(&LossWeights::w_tv_spacetime)},
      {"w_smooth_time", loss_field(&LossWeights::w_smooth_time)},
      {"w_time_invariant", loss_field(&LossWeights::w_time_invariant)},
      {"w_histogram", loss_field(&LossWeights::w_histogram)},
      {"seed", size_field(&TrainConfig::seed)},
      {"decoder_width", size_field(&TrainConfig::decoder_width)},
      {"decoder_layers", size_field(&TrainConfig::decoder_layers)},
      {"samplenet_width", size_field(&TrainConfig::samplenet_width)},
      {"samplenet_layers", size_field(&TrainConfig::samplenet_layers)},
      {"static_only", bool_field(&TrainConfig::static_only)},
      {"samplenet_photometric", bool_field(&TrainConfig::samplenet_photometric)},
      {"checkpoint_every", size_field(&TrainConfig::checkpoint_every)},
  };
  return table;
}

}  // namespace

void apply_config(TrainConfig& config, const ConfigEntries& entries) {
  for (const auto& [key, value] : entries) {
    auto it = fields().find(key);
    if (it == fields().end()) throw ContractViolation("config: unknown key '" + key + "'");
    it->second.set(config, key, value);
  }
}

ConfigEntries to_entries(const TrainConfig& config) {
  ConfigEntries out;
  for (const auto& [key, f] : fields()) out[key] = f.get(config);
  return out;
}

std::string format_config(const TrainConfig& config) {
  std::string s;
  for (const auto& [key, value] : to_entries(config)) s += key + " = " + value + "\n";
  return s;
}

}  // namespace planefield
