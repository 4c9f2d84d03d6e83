#include "rcmlab/geometry.hpp"

namespace rcmlab {

std::vector<Point> euclidean_ball_sites(int d, const Point& center, double radius) {
  std::vector<Point> out;
  int32_t r = int32_t(std::floor(radius));
  double r2 = radius * radius;
  Point p = center;
  for (int i = 0; i < d; ++i) p.c[i] -= r;
  // odometer over the bounding cube
  while (true) {
    if (double(l2sq_dist(p, center, d)) <= r2) out.push_back(p);
    int axis = d - 1;
    while (axis >= 0) {
      if (p.c[axis] < center.c[axis] + r) {
        ++p.c[axis];
        break;
      }
      p.c[axis] = center.c[axis] - r;
      --axis;
    }
    if (axis < 0) break;
  }
  return out;
}

std::vector<Point> sup_ball_sites(int d, const Point& center, int32_t radius) {
  LatticeRegion box = make_box(d, center, radius);
  std::vector<Point> out;
  out.reserve(box.site_count());
  for (int64_t i = 0; i < box.site_count(); ++i) out.push_back(box.site_at(i));
  return out;
}

}  // namespace rcmlab
