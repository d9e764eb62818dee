#include "segrefine/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "segrefine/error.hpp"

namespace segrefine {

namespace {

using nlohmann::json;

void violation(const std::string& msg) { throw Error(ErrorCode::ConstraintViolation, msg); }

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) violation(where + " must be a JSON object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!known.contains(key)) throw Error(ErrorCode::UnknownKey, where.empty() ? key : where + "." + key);
}

void read_number(const json& obj, const char* key, const std::string& where, double& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj[key];
  if (!v.is_number()) violation(where + "." + key + " must be a number");
  out = v.get<double>();
  if (!std::isfinite(out)) violation(where + "." + key + " must be finite");
}

void read_number(const json& obj, const char* key, const std::string& where, float& out) {
  double d = out;
  read_number(obj, key, where, d);
  out = static_cast<float>(d);
}

void read_count(const json& obj, const char* key, const std::string& where, std::size_t& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj[key];
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    violation(where + "." + key + " must be a non-negative integer");
  out = v.get<std::size_t>();
}

}  // namespace

void PipelineConfig::validate() const {
  if (!std::isfinite(lambda1) || lambda1 < 0.0) violation("lambda1 must be finite and >= 0");
  if (graph.k < 1) violation("graph.k must be >= 1");
  if (!(graph.tau > 0.0)) violation("graph.tau must be > 0");
  if (!(diffusion.alpha > 0.0 && diffusion.alpha < 1.0)) violation("diffusion.alpha must lie in (0, 1)");
  cscp.validate();
  if (!(superpixel.scale > 0.0f)) violation("superpixel.scale must be > 0");
  if (superpixel.min_size < 1) violation("superpixel.min_size must be >= 1");
  if (superpixel.sigma < 0.0f) violation("superpixel.sigma must be >= 0");
  if (!(edges.w_in > 0.0) || !(edges.w_cross > 0.0)) violation("superpixel.w_in and w_cross must be > 0");
}

nlohmann::ordered_json PipelineConfig::to_json() const {
  nlohmann::ordered_json j;
  j["lambda1"] = lambda1;
  j["graph"] = {{"k", graph.k}, {"tau", graph.tau}};
  j["diffusion"] = {{"alpha", diffusion.alpha}, {"steps", diffusion.steps}};
  j["cscp"] = {{"lambda_c", cscp.lambda_c},   {"lambda_d", cscp.lambda_d},
               {"beta", cscp.beta},           {"max_iters", cscp.max_iters},
               {"rel_tol", cscp.rel_tol},     {"softmax_temp", cscp.softmax_temp},
               {"eps_floor", cscp.eps_floor}};
  j["superpixel"] = {{"scale", superpixel.scale}, {"min_size", superpixel.min_size}, {"sigma", superpixel.sigma},
                     {"w_in", edges.w_in},        {"w_cross", edges.w_cross}};
  j["eval"] = {{"ignore_index", ignore_index ? nlohmann::ordered_json(*ignore_index) : nullptr}};
  return j;
}

PipelineConfig parse_config(const json& j) {
  PipelineConfig c;
  reject_unknown(j, "", {"lambda1", "graph", "diffusion", "cscp", "superpixel", "eval"});
  read_number(j, "lambda1", "", c.lambda1);

  if (j.contains("graph")) {
    const auto& g = j["graph"];
    reject_unknown(g, "graph", {"k", "tau"});
    read_count(g, "k", "graph", c.graph.k);
    read_number(g, "tau", "graph", c.graph.tau);
  }
  if (j.contains("diffusion")) {
    const auto& d = j["diffusion"];
    reject_unknown(d, "diffusion", {"alpha", "steps"});
    read_number(d, "alpha", "diffusion", c.diffusion.alpha);
    read_count(d, "steps", "diffusion", c.diffusion.steps);
  }
  if (j.contains("cscp")) {
    const auto& s = j["cscp"];
    reject_unknown(s, "cscp", {"lambda_c", "lambda_d", "beta", "max_iters", "rel_tol", "softmax_temp", "eps_floor"});
    read_number(s, "lambda_c", "cscp", c.cscp.lambda_c);
    read_number(s, "lambda_d", "cscp", c.cscp.lambda_d);
    read_number(s, "beta", "cscp", c.cscp.beta);
    read_count(s, "max_iters", "cscp", c.cscp.max_iters);
    read_number(s, "rel_tol", "cscp", c.cscp.rel_tol);
    read_number(s, "softmax_temp", "cscp", c.cscp.softmax_temp);
    read_number(s, "eps_floor", "cscp", c.cscp.eps_floor);
  }
  if (j.contains("superpixel")) {
    const auto& s = j["superpixel"];
    reject_unknown(s, "superpixel", {"scale", "min_size", "sigma", "w_in", "w_cross"});
    read_number(s, "scale", "superpixel", c.superpixel.scale);
    read_count(s, "min_size", "superpixel", c.superpixel.min_size);
    read_number(s, "sigma", "superpixel", c.superpixel.sigma);
    read_number(s, "w_in", "superpixel", c.edges.w_in);
    read_number(s, "w_cross", "superpixel", c.edges.w_cross);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    reject_unknown(e, "eval", {"ignore_index"});
    if (e.contains("ignore_index")) {
      const auto& v = e["ignore_index"];
      if (v.is_null()) c.ignore_index.reset();
      else if (v.is_number_integer()) c.ignore_index = v.get<std::int64_t>();
      else violation("eval.ignore_index must be an integer or null");
    }
  }
  c.validate();
  return c;
}

PipelineConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConstraintViolation, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    violation("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(j);
}

}  // namespace segrefine
