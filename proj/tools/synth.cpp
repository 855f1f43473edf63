// Writes a Gaussian-blob feature CSV and manifest in the extractor's format.
#include <iostream>

#include "CLI11.hpp"
#include "deepfeat/data.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic feature CSV generator"};
  deepfeat::data::BlobSpec spec;
  std::string out;
  std::string model = "resnet101";
  app.add_option("--out", out, "Output CSV path")->required();
  app.add_option("--model", model, "Extraction model name written to the manifest");
  app.add_option("--n", spec.n, "Samples");
  app.add_option("--d", spec.d, "Features");
  app.add_option("--classes", spec.classes, "Classes");
  app.add_option("--center-scale", spec.center_scale, "Spread of class centres");
  app.add_option("--noise", spec.noise, "Spread of samples around their centre");
  app.add_option("--seed", spec.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto ds = deepfeat::data::make_blobs(spec);
    deepfeat::data::Manifest m;
    m.extractor_model = model;
    m.feature_dim = spec.d;
    m.class_names = ds.class_names;
    m.extractor_version = "synthetic";
    deepfeat::data::export_feature_csv(ds, m, out);
    std::cout << "wrote " << out << " (" << spec.n << " x " << spec.d << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
