//! Generating the toy datasets and round-tripping them through CSV.

use idrs::datasets::{
    generate_cone, generate_sector, in_cone, load_dataset, save_dataset, ConeDatasetSpec,
    SectorDatasetSpec,
};

fn main() -> idrs::Result<()> {
    let sector = generate_sector(&SectorDatasetSpec::default())?;
    println!(
        "sector: {} points in {} classes",
        sector.len(),
        sector.num_classes()
    );
    let (cone, stats) = generate_cone(&ConeDatasetSpec {
        dim: 18,
        ..ConeDatasetSpec::default()
    })?;
    let inside = (0..cone.len())
        .filter(|&i| cone.label(i) == 1 && in_cone(cone.point(i), 0.3))
        .count();
    println!(
        "cone N=18: {} points, {inside} of class 1 inside the cone, {stats:?}",
        cone.len()
    );

    let dir = std::env::temp_dir().join("idrs-datasets-example.csv");
    save_dataset(&dir, &sector)?;
    let back = load_dataset(&dir)?;
    println!("round trip identical: {}", back == sector);
    std::fs::remove_file(dir)?;
    Ok(())
}
