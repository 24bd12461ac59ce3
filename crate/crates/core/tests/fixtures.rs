use std::fs;
use std::path::PathBuf;

use crf::crfields::{parse_series_file, series_file_text, TangentField};
use crf::germ::Germ;

fn files(ext: &str) -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    v.sort();
    v
}

#[test]
fn germs_round_trip() {
    let germs = files("germ");
    assert!(germs.len() >= 6);
    for p in germs {
        let g = Germ::parse(&fs::read_to_string(&p).unwrap()).unwrap();
        let text = g.to_text();
        let back = Germ::parse(&text).unwrap();
        assert_eq!(back, g, "{}", p.display());
        assert_eq!(back.to_text(), text, "{}", p.display());
    }
}

#[test]
fn fields_and_chis_round_trip() {
    for p in files("field") {
        let f = TangentField::parse(&fs::read_to_string(&p).unwrap()).unwrap();
        let text = f.to_text();
        assert_eq!(TangentField::parse(&text).unwrap(), f, "{}", p.display());
    }
    for p in files("chi") {
        let s = parse_series_file(&fs::read_to_string(&p).unwrap()).unwrap();
        assert!(s.is_real(), "{}", p.display());
        assert_eq!(parse_series_file(&series_file_text(&s)).unwrap(), s);
    }
}
