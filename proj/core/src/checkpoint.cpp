#include "mapid/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mapid {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json mat_to_json(const Mat& m) {
  return ordered_json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Mat mat_from_json(const ordered_json& j) {
  Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto& data = j.at("data");
  if (data.size() != m.size()) throw std::runtime_error("checkpoint matrix size mismatch");
  m.data = data.get<std::vector<double>>();
  return m;
}

UnaryOp op_from_name(const std::string& name) {
  if (name == "sin") return UnaryOp::Sin;
  if (name == "abs") return UnaryOp::Abs;
  if (name == "exp") return UnaryOp::Exp;
  if (name == "sign") return UnaryOp::Sign;
  throw std::runtime_error("unknown operator in checkpoint: " + name);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  ordered_json j;
  j["format_version"] = ckpt.format_version;
  ordered_json cfg;
  cfg["n"] = ckpt.config.n;
  cfg["stacks"] = ckpt.config.stacks;
  cfg["layers"] = ckpt.config.layers;
  ordered_json ops = ordered_json::array();
  for (UnaryOp op : ckpt.config.operators) ops.push_back(unary_op_name(op));
  cfg["operators"] = ops;
  cfg["h_lin"] = ckpt.config.h_lin;
  cfg["h_sig"] = ckpt.config.h_sig;
  cfg["h_op"] = ckpt.config.h_op;
  cfg["bias_value"] = ckpt.config.bias_value;
  j["config"] = cfg;
  j["seed"] = ckpt.seed;

  ordered_json stacks = ordered_json::array();
  for (const StackParams& stack : ckpt.params.stacks) {
    ordered_json layers = ordered_json::array();
    for (const LayerParams& layer : stack.layers) {
      ordered_json ws = ordered_json::array();
      for (const Mat& w : layer.w_op) ws.push_back(mat_to_json(w));
      layers.push_back(ordered_json{{"w_lin", mat_to_json(layer.w_lin)},
                                    {"e_sig", mat_to_json(layer.e_sig)},
                                    {"w_op", ws}});
    }
    stacks.push_back(
        ordered_json{{"layers", layers}, {"w_out", mat_to_json(stack.w_out)}});
  }
  j["stacks"] = stacks;

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  ordered_json j;
  f >> j;

  Checkpoint ckpt;
  ckpt.format_version = j.at("format_version").get<int>();
  if (ckpt.format_version != 1)
    throw std::runtime_error("unsupported checkpoint format_version");
  const auto& cfg = j.at("config");
  ckpt.config.n = cfg.at("n").get<int>();
  ckpt.config.stacks = cfg.at("stacks").get<int>();
  ckpt.config.layers = cfg.at("layers").get<int>();
  for (const auto& name : cfg.at("operators"))
    ckpt.config.operators.push_back(op_from_name(name.get<std::string>()));
  ckpt.config.h_lin = cfg.at("h_lin").get<int>();
  ckpt.config.h_sig = cfg.at("h_sig").get<int>();
  ckpt.config.h_op = cfg.at("h_op").get<int>();
  ckpt.config.bias_value = cfg.at("bias_value").get<double>();
  ckpt.seed = j.at("seed").get<std::uint64_t>();

  for (const auto& js : j.at("stacks")) {
    StackParams stack;
    for (const auto& jl : js.at("layers")) {
      LayerParams layer;
      layer.w_lin = mat_from_json(jl.at("w_lin"));
      layer.e_sig = mat_from_json(jl.at("e_sig"));
      for (const auto& jw : jl.at("w_op")) layer.w_op.push_back(mat_from_json(jw));
      stack.layers.push_back(std::move(layer));
    }
    stack.w_out = mat_from_json(js.at("w_out"));
    ckpt.params.stacks.push_back(std::move(stack));
  }
  return ckpt;
}

}  // namespace mapid
