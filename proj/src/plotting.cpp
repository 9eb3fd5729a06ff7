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

#include "demiguise/plotting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "demiguise/errors.hpp"
#include "demiguise/imaging.hpp"

namespace demiguise::cli {
namespace fs = std::filesystem;
using evaluation::AggregateCell;
using evaluation::ExperimentReport;

namespace {

struct Rgb {
  double r, g, b;
};

constexpr Rgb kWhite{1, 1, 1};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{0.85, 0.85, 0.85};
constexpr std::array<Rgb, 8> kPalette = {{{0.12, 0.47, 0.71},
                                          {1.00, 0.50, 0.05},
                                          {0.17, 0.63, 0.17},
                                          {0.84, 0.15, 0.16},
                                          {0.58, 0.40, 0.74},
                                          {0.55, 0.34, 0.29},
                                          {0.89, 0.47, 0.76},
                                          {0.50, 0.50, 0.50}}};

// 3x5 bitmap glyphs, rows top to bottom.
const std::map<char, std::array<const char*, 5>>& glyphs() {
  static const std::map<char, std::array<const char*, 5>> g = {
      {'0', {"###", "#.#", "#.#", "#.#", "###"}}, {'1', {".#.", "##.", ".#.", ".#.", "###"}},
      {'2', {"###", "..#", "###", "#..", "###"}}, {'3', {"###", "..#", ".##", "..#", "###"}},
      {'4', {"#.#", "#.#", "###", "..#", "..#"}}, {'5', {"###", "#..", "###", "..#", "###"}},
      {'6', {"###", "#..", "###", "#.#", "###"}}, {'7', {"###", "..#", "..#", ".#.", ".#."}},
      {'8', {"###", "#.#", "###", "#.#", "###"}}, {'9', {"###", "#.#", "###", "..#", "###"}},
      {'A', {".#.", "#.#", "###", "#.#", "#.#"}}, {'B', {"##.", "#.#", "##.", "#.#", "##."}},
      {'C', {".##", "#..", "#..", "#..", ".##"}}, {'D', {"##.", "#.#", "#.#", "#.#", "##."}},
      {'E', {"###", "#..", "##.", "#..", "###"}}, {'F', {"###", "#..", "##.", "#..", "#.."}},
      {'G', {".##", "#..", "#.#", "#.#", ".##"}}, {'H', {"#.#", "#.#", "###", "#.#", "#.#"}},
      {'I', {"###", ".#.", ".#.", ".#.", "###"}}, {'J', {"..#", "..#", "..#", "#.#", ".#."}},
      {'K', {"#.#", "#.#", "##.", "#.#", "#.#"}}, {'L', {"#..", "#..", "#..", "#..", "###"}},
      {'M', {"#.#", "###", "###", "#.#", "#.#"}}, {'N', {"##.", "#.#", "#.#", "#.#", "#.#"}},
      {'O', {".#.", "#.#", "#.#", "#.#", ".#."}}, {'P', {"##.", "#.#", "##.", "#..", "#.."}},
      {'Q', {".#.", "#.#", "#.#", "##.", ".##"}}, {'R', {"##.", "#.#", "##.", "#.#", "#.#"}},
      {'S', {".##", "#..", ".#.", "..#", "##."}}, {'T', {"###", ".#.", ".#.", ".#.", ".#."}},
      {'U', {"#.#", "#.#", "#.#", "#.#", "###"}}, {'V', {"#.#", "#.#", "#.#", "#.#", ".#."}},
      {'W', {"#.#", "#.#", "###", "###", "#.#"}}, {'X', {"#.#", "#.#", ".#.", "#.#", "#.#"}},
      {'Y', {"#.#", "#.#", ".#.", ".#.", ".#."}}, {'Z', {"###", "..#", ".#.", "#..", "###"}},
      {'.', {"...", "...", "...", "...", ".#."}}, {'-', {"...", "...", "###", "...", "..."}},
      {':', {"...", ".#.", "...", ".#.", "..."}}, {'_', {"...", "...", "...", "...", "###"}},
      {'%', {"#.#", "..#", ".#.", "#..", "#.#"}}, {'/', {"..#", "..#", ".#.", "#..", "#.."}},
      {',', {"...", "...", "...", ".#.", "#.."}}, {' ', {"...", "...", "...", "...", "..."}}};
  return g;
}

class Canvas {
 public:
  Canvas(int width, int height) : t_(Shape3{3, height, width}) {
    for (double& v : t_.storage()) v = 1.0;
  }

  int width() const { return t_.width(); }
  int height() const { return t_.height(); }

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width() || y >= height()) return;
    t_.at(0, y, x) = c.r;
    t_.at(1, y, x) = c.g;
    t_.at(2, y, x) = c.b;
  }

  void rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
    }
  }

  void line(int x0, int y0, int x1, int y1, Rgb c, int thickness = 1) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      rect(x0 - thickness / 2, y0 - thickness / 2, x0 + (thickness - 1) / 2, y0 + (thickness - 1) / 2, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  static int text_width(const std::string& s, int scale = 2) { return static_cast<int>(s.size()) * 4 * scale; }

  void text(int x, int y, const std::string& s, Rgb c, int scale = 2) {
    for (char ch : s) {
      const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      const auto it = glyphs().find(up);
      const auto& rows = it == glyphs().end() ? glyphs().at('_') : it->second;
      for (int r = 0; r < 5; ++r) {
        for (int k = 0; k < 3; ++k) {
          if (rows[r][k] == '#') rect(x + k * scale, y + r * scale, x + (k + 1) * scale - 1, y + (r + 1) * scale - 1, c);
        }
      }
      x += 4 * scale;
    }
  }

  void image(int x, int y, const imaging::ImageTensor& img, int scale) {
    for (int h = 0; h < img.height(); ++h) {
      for (int w = 0; w < img.width(); ++w) {
        const int c1 = img.channels() == 3 ? 1 : 0, c2 = img.channels() == 3 ? 2 : 0;
        rect(x + w * scale, y + h * scale, x + (w + 1) * scale - 1, y + (h + 1) * scale - 1,
             {img.at(0, h, w), img.at(c1, h, w), img.at(c2, h, w)});
      }
    }
  }

  void save(const fs::path& path) const { imaging::save_image(imaging::ImageTensor::clamped(t_), path); }

 private:
  Tensor3 t_;
};

std::string percent(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.0f", v);
  return buf;
}

// Ordered unique rows and columns of one aggregate table.
struct Table {
  std::vector<std::string> rows, columns;
  std::map<std::pair<std::string, std::string>, double> cells;
};

Table table(const ExperimentReport& r, const std::string& name) {
  Table t;
  for (const AggregateCell& c : r.aggregates) {
    if (c.table != name) continue;
    if (std::find(t.rows.begin(), t.rows.end(), c.row) == t.rows.end()) t.rows.push_back(c.row);
    if (std::find(t.columns.begin(), t.columns.end(), c.column) == t.columns.end()) t.columns.push_back(c.column);
    t.cells[{c.row, c.column}] = c.value;
  }
  return t;
}

// Percent axis with horizontal grid lines every 20.
void percent_axis(Canvas& cv, int left, int top, int right, int bottom) {
  for (int v = 0; v <= 100; v += 20) {
    const int y = bottom - (bottom - top) * v / 100;
    cv.line(left, y, right, y, kGrid);
    cv.text(left - Canvas::text_width(std::to_string(v)) - 6, y - 5, std::to_string(v), kBlack);
  }
  cv.line(left, top, left, bottom, kBlack);
  cv.line(left, bottom, right, bottom, kBlack);
}

void legend(Canvas& cv, int x, int y, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const int yy = y + static_cast<int>(i) * 16;
    cv.rect(x, yy, x + 10, yy + 10, kPalette[i % kPalette.size()]);
    cv.text(x + 16, yy, names[i], kBlack);
  }
}

fs::path bars_figure(const ExperimentReport& r, const std::string& name, const fs::path& out) {
  const Table t = table(r, name);
  const int group_w = 24 * static_cast<int>(t.rows.size()) + 30;
  const int left = 50, top = 40, plot_h = 220;
  const int width = std::max(left + group_w * static_cast<int>(t.columns.size()) + 20, 320) + 200;
  Canvas cv(width, top + plot_h + 60);
  cv.text(left, 12, r.experiment_id + " " + name, kBlack);
  const int bottom = top + plot_h, right = width - 200;
  percent_axis(cv, left, top, right, bottom);
  for (std::size_t g = 0; g < t.columns.size(); ++g) {
    const int gx = left + 15 + static_cast<int>(g) * group_w;
    for (std::size_t b = 0; b < t.rows.size(); ++b) {
      const auto it = t.cells.find({t.rows[b], t.columns[g]});
      if (it == t.cells.end() || !std::isfinite(it->second)) continue;
      const int x0 = gx + static_cast<int>(b) * 24;
      const int y = bottom - static_cast<int>(std::lround(plot_h * std::clamp(it->second, 0.0, 100.0) / 100.0));
      cv.rect(x0, y, x0 + 18, bottom - 1, kPalette[b % kPalette.size()]);
      cv.text(x0, y - 12, percent(it->second), kBlack, 1);
    }
    cv.text(gx, bottom + 8, t.columns[g], kBlack);
  }
  legend(cv, right + 10, top, t.rows);
  const fs::path path = out / (r.experiment_id + ".bars." + name + ".png");
  cv.save(path);
  return path;
}

fs::path sweep_figure(const ExperimentReport& r, const std::string& name, const fs::path& out) {
  const Table t = table(r, name);
  const int panel_w = 300, plot_h = 220, top = 40, left = 50, gap = 70;
  Canvas cv(left + 2 * panel_w + gap + 200, top + plot_h + 70);
  cv.text(left, 12, r.experiment_id + " " + name, kBlack);
  const std::array<std::string, 2> kinds = {"jpeg", "bit_depth"};
  for (int p = 0; p < 2; ++p) {
    std::vector<std::string> xs;
    for (const std::string& row : t.rows) {
      if (row.rfind(kinds[p] + ":", 0) == 0) xs.push_back(row);
    }
    const int pl = left + p * (panel_w + gap), pr = pl + panel_w, bottom = top + plot_h;
    percent_axis(cv, pl, top, pr, bottom);
    cv.text(pl + panel_w / 2 - 40, bottom + 28, p == 0 ? "jpeg quality" : "bit depth", kBlack);
    if (xs.empty()) continue;
    auto xpos = [&](std::size_t i) {
      return pl + 15 + static_cast<int>((panel_w - 30) * (xs.size() == 1 ? 0.5 : double(i) / (xs.size() - 1)));
    };
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::string tick = xs[i].substr(xs[i].find(':') + 1);
      cv.text(xpos(i) - Canvas::text_width(tick) / 2, bottom + 8, tick, kBlack);
    }
    for (std::size_t a = 0; a < t.columns.size(); ++a) {
      int px = -1, py = -1;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto it = t.cells.find({xs[i], t.columns[a]});
        if (it == t.cells.end()) continue;
        const int x = xpos(i);
        const int y = bottom - static_cast<int>(std::lround(plot_h * std::clamp(it->second, 0.0, 100.0) / 100.0));
        if (px >= 0) cv.line(px, py, x, y, kPalette[a % kPalette.size()], 2);
        cv.rect(x - 2, y - 2, x + 2, y + 2, kPalette[a % kPalette.size()]);
        px = x;
        py = y;
      }
    }
  }
  legend(cv, left + 2 * panel_w + gap + 10, top, t.columns);
  std::string file = name;
  std::replace(file.begin(), file.end(), ':', '.');
  const fs::path path = out / (r.experiment_id + "." + file + ".png");
  cv.save(path);
  return path;
}

std::vector<fs::path> grid_figures(const ExperimentReport& r, const fs::path& report_dir, const fs::path& out) {
  constexpr int kMaxRows = 6, kScale = 3, kPad = 6;
  std::vector<std::string> models, attack_names, samples;
  auto add = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& rec : r.records) {
    add(models, rec.model);
    add(attack_names, rec.attack);
    if (samples.size() < kMaxRows) add(samples, rec.sample_id);
  }
  std::vector<fs::path> written;
  for (const std::string& model : models) {
    std::vector<imaging::ImageTensor> clean;
    for (const std::string& s : samples) {
      const fs::path p = report_dir / "clean" / (s + ".png");
      if (!fs::exists(p)) throw PreconditionError("image_grid needs " + p.string());
      clean.push_back(imaging::load_png(p));
    }
    const int cell = clean.front().width() * kScale + kPad;
    const int header = 40;
    Canvas cv(kPad + cell * (1 + 2 * static_cast<int>(attack_names.size())) + kPad,
              header + cell * static_cast<int>(samples.size()) + kPad);
    cv.text(kPad, 8, r.experiment_id + " " + model, kBlack);
    cv.text(kPad, 24, "clean", kBlack, 1);
    for (std::size_t a = 0; a < attack_names.size(); ++a) {
      const int x = kPad + cell * (1 + 2 * static_cast<int>(a));
      cv.text(x, 24, attack_names[a], kBlack, 1);
      cv.text(x + cell, 24, "delta", kBlack, 1);
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const int y = header + cell * static_cast<int>(i);
      cv.image(kPad, y, clean[i], kScale);
      for (std::size_t a = 0; a < attack_names.size(); ++a) {
        const fs::path p = report_dir / "adv" / attack_names[a] / model / (samples[i] + ".png");
        if (!fs::exists(p)) throw PreconditionError("image_grid needs " + p.string());
        const imaging::ImageTensor adv = imaging::load_png(p);
        const int x = kPad + cell * (1 + 2 * static_cast<int>(a));
        cv.image(x, y, adv, kScale);
        cv.image(x + cell, y, evaluation::perturbation_image(clean[i], adv), kScale);
      }
    }
    const fs::path path = out / (r.experiment_id + ".grid." + model + ".png");
    cv.save(path);
    written.push_back(path);
  }
  return written;
}

}  // namespace

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "bars") return PlotKind::bars;
  if (name == "sweep_lines") return PlotKind::sweep_lines;
  if (name == "image_grid") return PlotKind::image_grid;
  throw ConfigError("unknown plot kind '" + name + "' (expected bars, sweep_lines or image_grid)");
}

std::vector<fs::path> plot(const fs::path& report_path, PlotKind kind, const fs::path& out_dir) {
  const ExperimentReport r = evaluation::load_report(report_path);
  fs::create_directories(out_dir);
  std::vector<std::string> tables;
  for (const AggregateCell& c : r.aggregates) {
    if (std::find(tables.begin(), tables.end(), c.table) == tables.end()) tables.push_back(c.table);
  }
  std::vector<fs::path> written;
  switch (kind) {
    case PlotKind::bars: {
      // Transfer reports chart the per-target transfer rates; others their own tables.
      std::vector<std::string> wanted;
      for (const char* t : {"transfer_to", "semantics"}) {
        if (std::find(tables.begin(), tables.end(), t) != tables.end()) wanted.push_back(t);
      }
      if (wanted.empty() && std::find(tables.begin(), tables.end(), "fooling_rate") != tables.end()) {
        wanted.push_back("fooling_rate");
      }
      for (const std::string& t : wanted) written.push_back(bars_figure(r, t, out_dir));
      break;
    }
    case PlotKind::sweep_lines:
      for (const std::string& t : tables) {
        if (t.rfind("sweep:", 0) == 0) written.push_back(sweep_figure(r, t, out_dir));
      }
      break;
    case PlotKind::image_grid:
      if (!r.records.empty()) written = grid_figures(r, report_path.parent_path(), out_dir);
      break;
  }
  if (written.empty()) {
    throw PreconditionError("report " + report_path.string() + " has no data for this plot kind");
  }
  return written;
}

}  // namespace demiguise::cli
