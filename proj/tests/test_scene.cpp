#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "dvt/scene.hpp"

using namespace dvt;
using Catch::Approx;

namespace {

bool same_scene(const Scene& a, const Scene& b) {
  if (a.objects.size() != b.objects.size()) return false;
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    const auto &x = a.objects[i], &y = b.objects[i];
    if (x.shape.kind != y.shape.kind || x.shape.half_w != y.shape.half_w ||
        x.shape.half_l != y.shape.half_l || x.shape.radius != y.shape.radius)
      return false;
    if (x.pose.x != y.pose.x || x.pose.y != y.pose.y || x.pose.th != y.pose.th) return false;
    if (x.height != y.height || x.on_target != y.on_target) return false;
  }
  return a.target.center.x == b.target.center.x && a.target.center.y == b.target.center.y;
}

int mask_count(const Image& img, int ch) {
  int n = 0;
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c) n += img.at(ch, r, c) > 0.5f;
  return n;
}

}  // namespace

TEST_CASE("sampler determinism and validity", "[scene]") {
  SamplerConfig cfg;
  SECTION("same seed reproduces the scene exactly") {
    for (std::uint64_t seed : {1ull, 99ull, 123456789ull}) {
      REQUIRE(same_scene(sample_scene(cfg, seed, 3), sample_scene(cfg, seed, 3)));
    }
  }
  SECTION("footprints start inside the table and pairwise clear") {
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
      Scene s;
      try {
        s = sample_scene(cfg, seed, 4);
      } catch (const std::runtime_error&) {
        continue;
      }
      for (const auto& o : s.objects)
        REQUIRE(detail::footprint_in_rect(o.pose, o.shape, s.table));
      for (int i = 0; i < s.n_objects(); ++i)
        for (int j = i + 1; j < s.n_objects(); ++j)
          REQUIRE(penetration(s.objects[i].pose, s.objects[i].shape, s.objects[j].pose,
                              s.objects[j].shape) <= 0.0);
      const Rect tr = s.target.rect();
      REQUIRE(tr.x0 >= s.table.x0);
      REQUIRE(tr.x1 <= s.table.x1);
      REQUIRE(tr.y0 >= s.table.y0);
      REQUIRE(tr.y1 <= s.table.y1);
    }
  }
  SECTION("occupier frequency is one half") {
    int on_target = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      Scene s;
      try {
        s = sample_scene(cfg, seed, 2);
      } catch (const std::runtime_error&) {
        continue;
      }
      ++total;
      bool occ = false;
      for (const auto& o : s.objects) occ = occ || o.on_target;
      on_target += occ;
      if (occ) {
        REQUIRE_FALSE(s.objects[0].on_target);  // never the goal object
        REQUIRE(s.objects[1].pose.x == Approx(s.target.center.x));
        REQUIRE(s.objects[1].pose.y == Approx(s.target.center.y));
      }
    }
    const double frac = static_cast<double>(on_target) / total;
    REQUIRE(frac >= 0.47);
    REQUIRE(frac <= 0.53);
  }
  SECTION("single-object scenes never pre-place on the target") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const Scene s = sample_scene(cfg, seed, 1);
      REQUIRE_FALSE(s.objects[0].on_target);
      REQUIRE(initial_state(s).rests[0] == Rest::Table);
    }
  }
  SECTION("initial symbolic state mirrors sampler placement") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Scene s;
      try {
        s = sample_scene(cfg, seed, 3);
      } catch (const std::runtime_error&) {
        continue;  // occupier can be unplaceable near a table edge
      }
      const auto st = initial_state(s);
      REQUIRE(st.holds[0] == -1);
      REQUIRE(st.holds[1] == -1);
      for (int i = 0; i < s.n_objects(); ++i)
        REQUIRE(st.rests[i] == (s.objects[i].on_target ? Rest::Target : Rest::Table));
    }
  }
  SECTION("cylinder fraction is honored") {
    SamplerConfig c2 = cfg;
    c2.cylinder_fraction = 1.0;
    const Scene s = sample_scene(c2, 5, 3);
    for (const auto& o : s.objects) REQUIRE(o.shape.kind == ObjectShape::Kind::Cylinder);
  }
}

TEST_CASE("depth rendering", "[scene]") {
  Scene s;
  s.table = {0.0, 1.0, 0.0, 0.6};
  s.target.center = {0.8, 0.5};

  SECTION("empty table renders to zero") {
    const Image img = render_depth(s);
    for (float v : img.data) REQUIRE(v == 0.0f);
  }

  SECTION("single box: covered cells carry height / max_height") {
    SceneObject o;
    o.shape = ObjectShape::box(0.05, 0.025);  // 0.1 x 0.05 axis-aligned
    o.pose = {0.5, 0.3, 0.0};
    o.height = 0.1;
    s.objects = {o};
    const Image img = render_depth(s);
    int covered = 0;
    for (int r = 0; r < img.h; ++r)
      for (int c = 0; c < img.w; ++c) {
        const float v = img.at(0, r, c);
        if (v > 0.0f) {
          REQUIRE(v == Approx(0.1 / 0.12).margin(1e-6));
          ++covered;
        }
      }
    // analytic pixel count: (0.1/1.0*64) x (0.05/0.6*64) cells, +- perimeter
    const double ex = 0.1 / 1.0 * 64, ey = 0.05 / 0.6 * 64;
    REQUIRE(covered >= (ex - 1) * (ey - 1));
    REQUIRE(covered <= (ex + 1) * (ey + 1));
  }

  SECTION("overlap keeps the taller object") {
    SceneObject a, b;
    a.shape = ObjectShape::box(0.05, 0.05);
    a.pose = {0.5, 0.3, 0.0};
    a.height = 0.06;
    b.shape = ObjectShape::box(0.05, 0.05);
    b.pose = {0.53, 0.3, 0.0};
    b.height = 0.12;
    s.objects = {a, b};
    const Image img = render_depth(s);
    // a cell covered by both shows the taller height
    float v = img.at(0, img.h / 2, static_cast<int>(0.52 * img.w));
    REQUIRE(v == Approx(1.0).margin(1e-6));
  }

  SECTION("doubling the resolution quadruples footprint pixels") {
    SceneObject o;
    o.shape = ObjectShape::box(0.06, 0.04);
    o.pose = {0.47, 0.33, 0.7};
    o.height = 0.1;
    s.objects = {o};
    RenderConfig lo{32, 32, 0.12}, hi{64, 64, 0.12};
    const int nlo = mask_count(render_depth(s, lo), 0);
    const int nhi = mask_count(render_depth(s, hi), 0);
    // perimeter band ~ 2*(w+l)/cell; allow a generous band
    REQUIRE(std::abs(nhi - 4 * nlo) <= 4 * 40);
  }
}

TEST_CASE("action and goal images", "[scene]") {
  const SamplerConfig cfg;
  const Scene s = sample_scene(cfg, 77, 2);
  const RenderConfig rc;

  SECTION("grasp tuple zeroes the surface channel") {
    const Image img = render_action_image(s, ActionObjects::of(Action::grasp(Arm::Left, 0, 1)));
    REQUIRE(img.channels == 3);
    for (int r = 0; r < img.h; ++r)
      for (int c = 0; c < img.w; ++c) REQUIRE(img.at(2, r, c) == 0.0f);
    REQUIRE(mask_count(img, 1) > 0);
  }

  SECTION("place-on-target masks the target square") {
    const Image img =
        render_action_image(s, ActionObjects::of(Action::place(Arm::Left, 0, Surface::Target)));
    const Rect tr = s.target.rect();
    for (int r = 0; r < img.h; ++r)
      for (int c = 0; c < img.w; ++c) {
        const Vec2 q = detail::cell_center(s.table, img.w, img.h, r, c);
        REQUIRE((img.at(2, r, c) > 0.5f) == tr.contains(q));
      }
    const double area_cells = (0.12 / 1.0 * rc.w) * (0.12 / 0.6 * rc.h);
    REQUIRE(mask_count(img, 2) >= (0.12 * rc.w - 1) * (0.12 / 0.6 * rc.h - 1));
    REQUIRE(mask_count(img, 2) <= area_cells + 2 * (0.12 * rc.w + 0.12 / 0.6 * rc.h) + 4);
  }

  SECTION("place-on-table lights the whole raster") {
    const Image img =
        render_action_image(s, ActionObjects::of(Action::place(Arm::Left, 0, Surface::Table)));
    REQUIRE(mask_count(img, 2) == img.w * img.h);
  }

  SECTION("channel 0 is the initial-scene depth") {
    const Image img = render_action_image(s, {0, std::nullopt});
    const Image depth = render_depth(s);
    for (std::size_t i = 0; i < depth.data.size(); ++i) REQUIRE(img.data[i] == depth.data[i]);
  }

  SECTION("object mask is a subset of depth support") {
    for (int obj = 0; obj < 2; ++obj) {
      const Image img = render_action_image(s, {obj, std::nullopt});
      for (int r = 0; r < img.h; ++r)
        for (int c = 0; c < img.w; ++c)
          if (img.at(1, r, c) > 0.5f) REQUIRE(img.at(0, r, c) > 0.0f);
    }
  }

  SECTION("goal image equals the equivalent place-on-target image") {
    const Image a = render_goal_image(s, Goal{0});
    const Image b = render_action_image(s, {0, Surface::Target});
    REQUIRE(a.data == b.data);
  }

  SECTION("moving a non-goal object changes only the depth channel") {
    Scene t = s;
    t.objects[1].pose.x += 0.08;
    const Image a = render_goal_image(s, Goal{0});
    const Image b = render_goal_image(t, Goal{0});
    bool depth_changed = false;
    for (int r = 0; r < a.h; ++r)
      for (int c = 0; c < a.w; ++c) {
        depth_changed = depth_changed || a.at(0, r, c) != b.at(0, r, c);
        REQUIRE(a.at(1, r, c) == b.at(1, r, c));
        REQUIRE(a.at(2, r, c) == b.at(2, r, c));
      }
    REQUIRE(depth_changed);
  }

  SECTION("unknown object id throws") {
    REQUIRE_THROWS_AS(render_action_image(s, {5, std::nullopt}), std::out_of_range);
  }
}

TEST_CASE("pgm export", "[scene]") {
  const char* path = "test_scene_out.pgm";

  SECTION("extremes map to 0x00 and 0xff") {
    Image img(1, 4, 2);
    for (auto& v : img.data) v = 0.0f;
    export_pgm(img, 0, path);
    std::ifstream in(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(all == std::string("P5\n4 2\n255\n") + std::string(8, '\0'));

    for (auto& v : img.data) v = 1.0f;
    export_pgm(img, 0, path);
    std::ifstream in2(path, std::ios::binary);
    std::string all2((std::istreambuf_iterator<char>(in2)), std::istreambuf_iterator<char>());
    REQUIRE(all2 == std::string("P5\n4 2\n255\n") + std::string(8, '\xff'));
  }

  SECTION("round trip reproduces quantized values") {
    Image img(1, 8, 8);
    Rng rng(4);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    export_pgm(img, 0, path);
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int w, h, maxv;
    in >> magic >> w >> h >> maxv;
    in.get();
    REQUIRE(magic == "P5");
    REQUIRE(w == 8);
    REQUIRE(h == 8);
    REQUIRE(maxv == 255);
    for (int i = 0; i < 64; ++i) {
      const int byte = static_cast<unsigned char>(in.get());
      REQUIRE(byte == static_cast<int>(img.data[static_cast<std::size_t>(i)] * 255.0f + 0.5f));
    }
  }
  std::remove(path);
}
