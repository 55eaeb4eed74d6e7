#include "urbanfuse/visual_features.hpp"

#include <algorithm>

#include "urbanfuse/error.hpp"

namespace urbanfuse {

FeatureBlock visual_block(const Dataset& dataset, const VisualTable& table, std::string name) {
  Matrix m(dataset.size(), kVisualDims + 1, 0.0);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    const auto& rep = dataset.reports[r];
    if (!rep.image_ref) continue;
    const auto it = table.find(*rep.image_ref);
    if (it == table.end()) {
      throw Error(ErrorCode::alignment, "report '" + rep.id + "' references image '" + *rep.image_ref +
                                            "' with no visual features");
    }
    auto row = m.row(r);
    std::copy(it->second.vector.begin(), it->second.vector.end(), row.begin());
    row[kVisualDims] = 1.0;
  }
  std::vector<std::string> columns;
  columns.reserve(kVisualDims + 1);
  for (std::size_t d = 0; d < kVisualDims; ++d) columns.push_back("v" + std::to_string(d));
  columns.push_back("has_image");
  return FeatureBlock(std::move(name), BlockKind::raw, report_ids(dataset), std::move(m), std::move(columns));
}

}  // namespace urbanfuse
