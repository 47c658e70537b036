use bbl_core::{gfn, Error, GridFunction};
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = GridFunction> {
    (1usize..=3)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(1usize..5, d),
                prop::collection::vec(-10.0f64..10.0, d),
                1e-4f64..2.0,
            )
        })
        .prop_flat_map(|(shape, origin, h)| {
            let n: usize = shape.iter().product();
            let vals = prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e6, 1e-300f64..1e-200], n);
            (Just(shape), Just(origin), Just(h), vals)
        })
        .prop_map(|(shape, origin, h, vals)| GridFunction::new(origin, h, shape, vals).unwrap())
}

proptest! {
    #[test]
    fn text_round_trip_is_exact(f in grid()) {
        let back = gfn::parse(&gfn::to_string(&f)).unwrap();
        prop_assert_eq!(back.origin(), f.origin());
        prop_assert_eq!(back.spacing(), f.spacing());
        prop_assert_eq!(back.shape(), f.shape());
        prop_assert_eq!(back.values(), f.values());
    }

    #[test]
    fn io_round_trip(f in grid()) {
        let mut buf = Vec::new();
        gfn::write(&f, &mut buf).unwrap();
        let back = gfn::read(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), f.values());
    }
}

#[test]
fn comments_blank_lines_and_free_layout() {
    let text = "# a 2x3 grid\n\ngfn 2 0.5 -1 0 2 3\n  # first row\n1 2 3\n\n4 5\n6\n";
    let f = gfn::parse(text).unwrap();
    assert_eq!(f.shape(), &[2, 3]);
    assert_eq!(f.origin(), &[-1.0, 0.0]);
    assert_eq!(f.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!((f.integral() - 21.0 * 0.25).abs() < 1e-15);
}

fn parse_line(text: &str) -> usize {
    match gfn::parse(text) {
        Err(Error::Parse { line, .. }) => line,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn errors_carry_line_numbers() {
    assert_eq!(parse_line(""), 1);
    assert_eq!(parse_line("# only a comment\n"), 1);
    assert_eq!(parse_line("\n\nfoo 1 0.1 0 2\n1 1\n"), 3);
    assert_eq!(parse_line("gfn 4 0.1 0 0 0 0 1 1 1 1\n1\n"), 1);
    assert_eq!(parse_line("gfn 2 0.1 0 0 2\n1 1\n"), 1);
    assert_eq!(parse_line("gfn 1 -0.1 0 2\n1 1\n"), 1);
    assert_eq!(parse_line("gfn 1 0.1 0 2.5\n1 1\n"), 1);
    assert_eq!(parse_line("gfn 1 0.1 x 2\n1 1\n"), 1);
    assert_eq!(parse_line("gfn 1 0.1 0 3\n1 1\n# c\n1 nan\n"), 4);
    assert_eq!(parse_line("gfn 1 0.1 0 3\n1 1 abc\n"), 2);
    assert_eq!(parse_line("gfn 1 0.1 0 3\n1 1 inf\n"), 2);
    assert_eq!(parse_line("gfn 1 0.1 0 3\n1 1\n"), 2);
    assert_eq!(parse_line("gfn 1 0.1 0 2\n1 1 1\n\n"), 3);
}

#[test]
fn save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.gfn");
    let f = GridFunction::new(vec![0.25, -3.0], 0.1, vec![2, 2], vec![0.1, 0.2, 0.0, 1.0 / 3.0]).unwrap();
    gfn::save(&f, &path).unwrap();
    assert_eq!(gfn::load(&path).unwrap().values(), f.values());
    assert!(matches!(gfn::load(dir.path().join("missing.gfn")), Err(Error::Io(_))));
}
