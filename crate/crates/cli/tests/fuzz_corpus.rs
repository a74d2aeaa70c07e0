//! Replays the checked-in fuzz seeds through the same parsers and invariants
//! as the fuzz targets.

use std::fs;
use std::path::PathBuf;

use num_traits::Signed;
use steinkit::jack_model::{parse_alpha, Partition};
use steinkit_cli::config::{
    parse_er_grid, parse_jack_grid, parse_kv_config, parse_thresholds, CONFIG_KEYS,
};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn expect(name: &str, ok: bool) {
    if name.starts_with("seed_") {
        assert!(ok, "{name} should parse");
    } else if name.starts_with("bad_") {
        assert!(!ok, "{name} should be rejected");
    }
}

#[test]
fn partition_seeds() {
    for (name, text) in seeds("partition") {
        let parsed = text.parse::<Partition>();
        if let Ok(p) = &parsed {
            assert_eq!(&p.to_string().parse::<Partition>().unwrap(), p);
            assert_eq!(&p.conjugate().conjugate(), p);
        }
        expect(&name, parsed.is_ok());
    }
}

#[test]
fn alpha_seeds() {
    for (name, text) in seeds("alpha") {
        let parsed = parse_alpha(&text);
        if let Ok(a) = &parsed {
            assert!(a.is_positive());
            assert_eq!(&parse_alpha(&a.to_string()).unwrap(), a);
        }
        expect(&name, parsed.is_ok());
    }
}

#[test]
fn kv_config_seeds() {
    for (name, text) in seeds("kv_config") {
        let parsed = parse_kv_config(&text);
        if let Ok(map) = &parsed {
            assert!(map.keys().all(|k| CONFIG_KEYS.contains(&k.as_str())));
        }
        expect(&name, parsed.is_ok());
    }
}

#[test]
fn grid_seeds() {
    for (name, text) in seeds("grid") {
        let er = parse_er_grid(&text);
        let jack = parse_jack_grid(&text);
        if let Ok(points) = &jack {
            assert!(points.iter().all(|p| p.alpha.value_f64(p.n) > 0.0));
        }
        expect(&name, er.is_ok() || jack.is_ok());
    }
}

#[test]
fn thresholds_seeds() {
    for (name, text) in seeds("thresholds") {
        expect(&name, parse_thresholds(&text).is_ok());
    }
}
