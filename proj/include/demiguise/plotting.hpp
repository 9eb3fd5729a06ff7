// Copyright 2026 The Demiguise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "demiguise/evaluation.hpp"

namespace demiguise::cli {

enum class PlotKind { bars, sweep_lines, image_grid };

PlotKind parse_plot_kind(const std::string& name);

// Renders PNG figures for a persisted report into out_dir and returns their
// paths. Throws PreconditionError when the report has nothing of that kind.
std::vector<std::filesystem::path> plot(const std::filesystem::path& report_path, PlotKind kind,
                                        const std::filesystem::path& out_dir);

}  // namespace demiguise::cli
