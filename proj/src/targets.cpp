#include "sdstex/guidance.hpp"

#include <algorithm>
#include <cmath>

namespace sdstex {

Image ProceduralTarget::render(const ViewContext& view) const {
  const GBuffer& gb = *view.gbuffer;
  Image img(gb.resolution, gb.resolution, 3, view.background);
  for (std::size_t p = 0; p < gb.pixel_count(); ++p) {
    if (!gb.hit(p)) continue;
    const Vec3 c = color_at(gb.surface_point[p]);
    for (int k = 0; k < 3; ++k) img.data[p * 3 + k] = c[k];
  }
  return img;
}

Vec3 CheckerboardTarget::color_at(const Vec3& point) const {
  long parity = 0;
  for (int a = 0; a < 3; ++a) parity += static_cast<long>(std::floor(point[a] * cells_));
  return (parity & 1) ? b_ : a_;
}

Vec3 GradientTarget::color_at(const Vec3& point) const {
  const double s = std::clamp((point[axis_] + 1.0) * 0.5, 0.0, 1.0);
  return from_ + s * (to_ - from_);
}

Image AtlasTarget::render(const ViewContext& view) const {
  return shade_with_atlas(*view.mesh, *view.gbuffer, atlas_, view.background);
}

Image FieldTarget::render(const ViewContext& view) const {
  return shade(*view.gbuffer, *field_, view.background);
}

}  // namespace sdstex
