// Extracts the six traditional feature groups from one image and prints them
// as JSON. Without an argument it uses a generated fixture tile.
#include <iostream>

#include <json.hpp>

#include "finj/features.hpp"
#include "finj/fixture.hpp"

int main(int argc, char** argv) {
  try {
    const finj::ImageRGB img = argc > 1 ? finj::load_image(argv[1]) : finj::fixture_tile(0, 0, 2024);
    const auto fv = finj::extract_all(img, finj::FeatureSelection::all());
    nlohmann::json out = {{"width", img.width}, {"height", img.height}, {"values", fv.flat().size()}};
    for (const auto& seg : fv.segments) out["groups"][std::string(finj::group_key(seg.group))] = seg.values;
    std::cout << out.dump(2) << "\n";
  } catch (const finj::Error& e) {
    std::cerr << finj::to_string(e.kind()) << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
