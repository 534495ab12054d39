#include "cotrain/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cotrain {

namespace {

using nlohmann::json;

json head_to_json(const HeadClassifier& m) {
  return json{{"type", "head"},
              {"architecture", m.arch == HeadArch::linear ? "linear" : "one_hidden"},
              {"input_dim", m.input_dim},
              {"num_labels", m.num_labels},
              {"hidden_dim", m.hidden_dim},
              {"params", m.params}};
}

json label_model_to_json(const LabelModelParams& p) {
  json w = json::array();
  for (const Matrix& wi : p.W) w.push_back(wi.values());
  return json{{"type", "label_model"}, {"num_prompts", p.num_prompts},
              {"num_labels", p.num_labels}, {"vocab_size", p.vocab_size},
              {"w", std::move(w)},         {"alpha", p.alpha}};
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

void save_model(const ViewZeroModel& model, const std::string& path) {
  if (std::holds_alternative<LabelModelParams>(model)) {
    write_json(label_model_to_json(std::get<LabelModelParams>(model)), path);
  } else {
    write_json(head_to_json(std::get<HeadClassifier>(model)), path);
  }
}

void save_model(const HeadClassifier& model, const std::string& path) {
  write_json(head_to_json(model), path);
}

ViewZeroModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": invalid checkpoint JSON: " + e.what());
  }

  const std::string type = j.at("type").get<std::string>();
  if (type == "label_model") {
    LabelModelParams p;
    p.num_prompts = j.at("num_prompts").get<int>();
    p.num_labels = j.at("num_labels").get<int>();
    p.vocab_size = j.at("vocab_size").get<int>();
    p.alpha = j.at("alpha").get<std::vector<double>>();
    for (const auto& wi : j.at("w")) {
      p.W.emplace_back(static_cast<std::size_t>(p.num_labels),
                       static_cast<std::size_t>(p.vocab_size),
                       wi.get<std::vector<double>>());
    }
    p.validate();
    return p;
  }
  if (type == "head") {
    HeadClassifier m;
    const std::string arch = j.at("architecture").get<std::string>();
    if (arch == "linear") {
      m.arch = HeadArch::linear;
    } else if (arch == "one_hidden") {
      m.arch = HeadArch::one_hidden;
    } else {
      throw std::runtime_error(path + ": unknown head architecture \"" + arch + "\"");
    }
    m.input_dim = j.at("input_dim").get<int>();
    m.num_labels = j.at("num_labels").get<int>();
    m.hidden_dim = j.at("hidden_dim").get<int>();
    m.params = j.at("params").get<std::vector<double>>();
    m.validate();
    return m;
  }
  throw std::runtime_error(path + ": unknown checkpoint type \"" + type + "\"");
}

}  // namespace cotrain
