#pragma once

#include <string>

#include "cotrain/cotrain.hpp"

namespace cotrain {

// JSON checkpoints: dims plus row-major parameter values.
void save_model(const ViewZeroModel& model, const std::string& path);
void save_model(const HeadClassifier& model, const std::string& path);
ViewZeroModel load_model(const std::string& path);

}  // namespace cotrain
