// SPDX-License-Identifier: Apache-2.0
#include "smoe/model/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "smoe/common/error.hpp"

namespace smoe::model {

void save_checkpoint(SMoETransformer& model, std::ostream& out) {
  nlohmann::json cfg = model.config();
  cfg["k_infer"] = model.inference_k();
  out << kCheckpointMagic << "\n";
  out << "config " << cfg.dump() << "\n";
  auto params = model.parameters();
  out << "tensors " << params.size() << "\n";
  char buf[64];
  for (const auto& p : params) {
    const auto& shape = p.tensor->shape();
    out << "tensor " << p.name << " " << shape.size();
    for (auto d : shape) out << " " << d;
    out << "\n";
    const auto data = p.tensor->data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", data[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << "\n";
  }
}

void save_checkpoint(SMoETransformer& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open checkpoint for writing: " + path.string());
  save_checkpoint(model, out);
}

namespace {
std::string expect_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("checkpoint truncated before " + what);
  return line;
}
}  // namespace

SMoETransformer load_checkpoint(std::istream& in) {
  if (expect_line(in, "magic") != kCheckpointMagic) {
    throw InputError(std::string("checkpoint does not start with ") + kCheckpointMagic);
  }
  const std::string cfg_line = expect_line(in, "config");
  if (cfg_line.rfind("config ", 0) != 0) throw InputError("checkpoint missing config line");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(cfg_line.substr(7));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  const std::size_t k_infer = cfg.value("k_infer", std::size_t{0});
  cfg.erase("k_infer");
  SMoETransformer model(cfg.get<ModelConfig>());
  if (k_infer != 0) model.set_inference_k(k_infer);

  std::istringstream header(expect_line(in, "tensor count"));
  std::string word;
  std::size_t count = 0;
  if (!(header >> word >> count) || word != "tensors") throw InputError("checkpoint missing tensor count");
  auto params = model.parameters();
  if (count != params.size()) {
    throw InputError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                     std::to_string(params.size()));
  }
  for (auto& p : params) {
    std::istringstream th(expect_line(in, "tensor header"));
    std::string name;
    std::size_t rank = 0;
    if (!(th >> word >> name >> rank) || word != "tensor") throw InputError("bad tensor header");
    if (name != p.name) throw InputError("checkpoint tensor " + name + " where " + p.name + " expected");
    nn::Shape shape(rank);
    for (auto& d : shape) th >> d;
    if (!th || shape != p.tensor->shape()) {
      throw InputError("checkpoint tensor " + name + " has shape " + nn::shape_string(shape) +
                       ", model expects " + nn::shape_string(p.tensor->shape()));
    }
    const std::string values = expect_line(in, "tensor values");
    const char* cursor = values.c_str();
    for (double& v : p.tensor->data()) {
      char* end = nullptr;
      v = std::strtod(cursor, &end);
      if (end == cursor) throw InputError("checkpoint tensor " + name + " has too few values");
      cursor = end;
    }
  }
  return model;
}

SMoETransformer load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint: " + path.string());
  return load_checkpoint(in);
}

}  // namespace smoe::model
