#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "finj/fixture.hpp"

int main(int argc, char** argv) {
  finj::FixtureOptions opt;
  std::string out_dir;
  std::string embeddings;
  CLI::App app{"Generate the procedural land-cover fixture and its synthetic embeddings", "finj-fixture"};
  app.add_option("--out", out_dir, "Dataset root to create")->required();
  app.add_option("--embeddings", embeddings, "EMB1 file to write (default: <out>/embeddings.emb)");
  app.add_option("--per-class", opt.per_class, "Images per class")->capture_default_str();
  app.add_option("--seed", opt.seed, "Tile seed")->capture_default_str();
  app.add_option("--size", opt.size, "Tile side in pixels")->capture_default_str();
  app.add_option("--dim", opt.embedding_dim, "Embedding width")->capture_default_str();
  app.add_option("--embed-seed", opt.embedding_seed, "Synthetic backbone seed")->capture_default_str();
  app.add_option("--backbone", opt.backbone, "Backbone name written into the EMB1 header")->capture_default_str();
  app.add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const auto result = finj::generate_fixture(out_dir, opt);
    if (embeddings.empty()) embeddings = (std::filesystem::path(out_dir) / "embeddings.emb").string();
    std::ofstream file(embeddings, std::ios::binary);
    finj::require(static_cast<bool>(file), finj::ErrorKind::Io, "cannot open " + embeddings);
    const auto bytes = finj::write_embeddings(result.store, file);
    std::cout << "wrote " << result.manifest.records.size() << " tiles to " << out_dir << " and " << bytes
              << " bytes of embeddings to " << embeddings << "\n";
  } catch (const finj::Error& e) {
    std::cerr << nlohmann::json{{"error", std::string(finj::to_string(e.kind()))}, {"message", e.what()}}.dump()
              << "\n";
    return 1;
  }
  return 0;
}
