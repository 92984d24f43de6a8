//! The bundled "Ads" example: a data reader, a decision on whether the data
//! supports quantitative analysis, and a quantitative or a qualitative
//! branch depending on the answer.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const ADS_WORKFLOW: &str = include_str!("../assets/ads/workflow.json");
pub const ADS_TREND_PARAMETERS: &str = include_str!("../assets/ads/input/parameters/trend.json");
/// Prompt of the `determine_data_feature` decision maker.
pub const ADS_DECISION_TEMPLATE: &str =
    include_str!("../assets/ads/prompts/sum_data_feature_determine.txt");
pub const ADS_MOCK_YES: &str = include_str!("../assets/ads/mock/yes.json");
pub const ADS_MOCK_NO: &str = include_str!("../assets/ads/mock/no.json");

/// Bundle files relative to the `GF_ROOT` directory.
pub const ADS_FILES: &[(&str, &str)] = &[
    ("data/workflows/Ads/workflow.json", ADS_WORKFLOW),
    ("data/workflows/Ads/input/parameters/trend.json", ADS_TREND_PARAMETERS),
    (
        "data/workflows/Ads/prompts/sum_data_reader.txt",
        include_str!("../assets/ads/prompts/sum_data_reader.txt"),
    ),
    (
        "data/workflows/Ads/prompts/sum_data_feature_determine.txt",
        ADS_DECISION_TEMPLATE,
    ),
    (
        "data/workflows/Ads/prompts/sum_trend_miner.txt",
        include_str!("../assets/ads/prompts/sum_trend_miner.txt"),
    ),
    (
        "data/workflows/Ads/prompts/sum_quantity_analysis.txt",
        include_str!("../assets/ads/prompts/sum_quantity_analysis.txt"),
    ),
    (
        "data/workflows/Ads/prompts/sum_quality_analysis_1.txt",
        include_str!("../assets/ads/prompts/sum_quality_analysis_1.txt"),
    ),
    (
        "data/workflows/Ads/prompts/sum_quality_analysis_2.txt",
        include_str!("../assets/ads/prompts/sum_quality_analysis_2.txt"),
    ),
    ("data/workflows/Ads/mock/yes.json", ADS_MOCK_YES),
    ("data/workflows/Ads/mock/no.json", ADS_MOCK_NO),
];

/// Path of the workflow document inside a scaffolded root.
pub fn ads_workflow_path(root: &Path) -> PathBuf {
    root.join(ADS_FILES[0].0)
}

/// Write the example bundle under `root`, which becomes `GF_ROOT`.
///
/// Refuses to touch a directory that already has entries.
pub fn write_ads_bundle(root: &Path) -> io::Result<()> {
    if root.exists() && fs::read_dir(root)?.next().is_some() {
        return Err(io::Error::new(
            io::ErrorKind::AlreadyExists,
            format!("{} is not empty", root.display()),
        ));
    }
    for (rel, contents) in ADS_FILES {
        let path = root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
    }
    Ok(())
}
