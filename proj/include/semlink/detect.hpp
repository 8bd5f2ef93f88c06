#pragma once

#include <span>
#include <string>
#include <vector>

namespace semlink {

/// Axis-aligned box in corner form with a detector score and class label.
struct DetBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double score = 0.0;
  std::string class_label;

  bool operator==(const DetBox&) const = default;
};

/// Throws kInvalidBox for inverted corners, non-finite coordinates or a
/// score outside [0, 1].
void validate_box(const DetBox& box);

double box_area(const DetBox& box);

/// Intersection over union; 0 when the union has zero area.
double iou(const DetBox& a, const DetBox& b);

inline constexpr double kDefaultIouThreshold = 0.5;
inline constexpr std::size_t kDefaultMaxKeep = 5;

/// Greedy per-class suppression in descending score order (ties by input
/// position). A box is dropped when it overlaps an already kept box of the
/// same class with IoU strictly above the threshold. The survivors are then
/// truncated to `max_keep` by score.
std::vector<DetBox> nms(std::span<const DetBox> boxes, double iou_threshold = kDefaultIouThreshold,
                        std::size_t max_keep = kDefaultMaxKeep);

/// Distinct class labels ordered by each label's best score (descending),
/// ties by first appearance.
std::vector<std::string> entities_from_boxes(std::span<const DetBox> boxes);

}  // namespace semlink
