#include "semlink/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semlink/error.hpp"

namespace semlink {

void validate_box(const DetBox& box) {
  for (double v : {box.x_min, box.y_min, box.x_max, box.y_max, box.score}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidBox, "box has a non-finite field");
  }
  if (box.x_max < box.x_min || box.y_max < box.y_min) {
    throw Error(ErrorCode::kInvalidBox, "box corners are inverted");
  }
  if (box.score < 0.0 || box.score > 1.0) throw Error(ErrorCode::kInvalidBox, "box score outside [0, 1]");
}

double box_area(const DetBox& box) { return (box.x_max - box.x_min) * (box.y_max - box.y_min); }

double iou(const DetBox& a, const DetBox& b) {
  validate_box(a);
  validate_box(b);
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (w > 0.0 && h > 0.0) ? w * h : 0.0;
  const double uni = box_area(a) + box_area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<DetBox> nms(std::span<const DetBox> boxes, double iou_threshold, std::size_t max_keep) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "IoU threshold must lie in [0, 1]");
  }
  if (max_keep == 0) throw Error(ErrorCode::kInvalidArgument, "max_keep must be at least 1");
  for (const DetBox& b : boxes) validate_box(b);

  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return boxes[a].score > boxes[b].score; });

  std::vector<DetBox> kept;
  std::vector<bool> suppressed(boxes.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[order[i]]) continue;
    const DetBox& best = boxes[order[i]];
    kept.push_back(best);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const DetBox& other = boxes[order[j]];
      if (!suppressed[order[j]] && other.class_label == best.class_label && iou(best, other) > iou_threshold) {
        suppressed[order[j]] = true;
      }
    }
  }
  if (kept.size() > max_keep) kept.resize(max_keep);
  return kept;
}

std::vector<std::string> entities_from_boxes(std::span<const DetBox> boxes) {
  struct Entry {
    std::string label;
    double best;
  };
  std::vector<Entry> entries;
  for (const DetBox& b : boxes) {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) { return e.label == b.class_label; });
    if (it == entries.end()) {
      entries.push_back({b.class_label, b.score});
    } else {
      it->best = std::max(it->best, b.score);
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.best > b.best; });
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (auto& e : entries) out.push_back(std::move(e.label));
  return out;
}

}  // namespace semlink
