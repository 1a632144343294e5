use relmcl::map::{load_map, load_map_from_meta, save_map, CellState, DistanceField, MapMetadata, DEFAULT_CLAMP};
use relmcl::sim::maps;

#[test]
fn bundled_maps_survive_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    for name in maps::BUNDLED {
        let g = maps::by_name(name, 0.05, 3).unwrap();
        let (img, meta) = (dir.path().join(format!("{name}.pgm")), dir.path().join(format!("{name}.yaml")));
        save_map(&g, &img, &meta).unwrap();
        let back = load_map(&img, &meta).unwrap();
        assert_eq!(back, g, "{name}");
        assert_eq!(load_map_from_meta(&meta).unwrap(), g);
        let a = DistanceField::build(&g, DEFAULT_CLAMP);
        let b = DistanceField::build(&back, DEFAULT_CLAMP);
        assert_eq!(a.values(), b.values());
    }
}

#[test]
fn metadata_text_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let g = maps::corridor_cross(0.1);
    let (img, meta) = (dir.path().join("m.pgm"), dir.path().join("m.yaml"));
    save_map(&g, &img, &meta).unwrap();
    let m = MapMetadata::parse(&std::fs::read_to_string(&meta).unwrap()).unwrap();
    assert_eq!(MapMetadata::parse(&m.to_text()).unwrap(), m);
    assert_eq!(m.resolution, 0.1);
}

#[test]
fn hollowed_map_keeps_free_space() {
    let g = maps::cluttered_office(0.05, 1);
    let h = g.hollowed(0.05);
    assert_eq!(h.count(CellState::Free), g.count(CellState::Free));
    assert!(h.count(CellState::Occupied) < g.count(CellState::Occupied));
    let (a, b) = (DistanceField::build(&g, DEFAULT_CLAMP), DistanceField::build(&h, DEFAULT_CLAMP));
    for (x, y) in g.free_cells() {
        assert_eq!(a.at(x, y), b.at(x, y));
    }
}
