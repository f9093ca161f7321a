#pragma once

#include <string>
#include <vector>

namespace statelab::cli {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index; throws ValidationError if absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, std::size_t col) const;
};

/// Plain comma-separated file with a header row and no quoting. Throws
/// IoError if unreadable and ValidationError on ragged or empty tables.
CsvTable read_csv(const std::string& path);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool line = false;
};

struct Figure {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool identity_line = false;
};

std::string render_svg(const Figure& fig);

enum class PlotKind { kAuto, kReport, kEmbedding, kPredictions, kTrainingLog };

PlotKind parse_plot_kind(const std::string& name);

/// Builds the figure for a CSV written by eval-ood, embed, finetune/predict
/// or pretrain. kAuto picks the kind from the header.
Figure figure_from_csv(const CsvTable& table, PlotKind kind);

}  // namespace statelab::cli
