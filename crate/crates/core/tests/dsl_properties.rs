use proptest::prelude::*;
use snpc_core::dsl::{parse_system, render_system, DslError};
use snpc_core::linfun::{build_pi_add, LinParams};
use snpc_core::numtheory::Rng;
use snpc_core::selftest::random_system;

const PI_ADD: &str = "system pi_add { neuron s1 { spikes = 7; a+ / a -> a; 2; } neuron s2 { spikes = 1; a -> a; 0; } neuron s3 { spikes = 0; a^4 -> a; 1; } syn { s1 -> s3; s3 -> s2; } out s2; }";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_systems_round_trip(seed in any::<u64>()) {
        let sys = random_system(&mut Rng::seeded(seed));
        let text = render_system(&sys);
        prop_assert_eq!(parse_system(&text).unwrap(), sys);
        prop_assert_eq!(render_system(&parse_system(&text).unwrap()), text);
    }

    #[test]
    fn pi_add_family_round_trips(t1 in 1u64..1000, t2 in 1u64..1000, k in 1u64..1000) {
        let sys = build_pi_add(&LinParams::new(t1, t2, k).unwrap());
        prop_assert_eq!(parse_system(&render_system(&sys)).unwrap(), sys);
    }

    #[test]
    fn parse_errors_point_into_the_input(cut in 0usize..PI_ADD.len(), junk in "[a-z0-9{};/|+^()= \n-]{0,6}") {
        let text = format!("{}{}", &PI_ADD[..cut], junk);
        if let Err(DslError::Parse(e)) = parse_system(&text) {
            let lines: Vec<&str> = text.split('\n').collect();
            prop_assert!(e.span.line >= 1 && e.span.line <= lines.len());
            let width = lines[e.span.line - 1].chars().count();
            prop_assert!(e.span.column >= 1 && e.span.column <= width + 1, "{} in {:?}", e, text);
        }
    }
}

#[test]
fn sink_only_system_round_trips() {
    let sys = parse_system("system x { neuron n { spikes = 0; } syn { } out n; }").unwrap();
    assert_eq!(parse_system(&render_system(&sys)).unwrap(), sys);
    assert_eq!(render_system(&sys), render_system(&sys));
}

#[test]
fn parsed_figure_equals_constructed_system() {
    let sys = parse_system(PI_ADD).unwrap();
    assert_eq!(
        sys,
        build_pi_add(&LinParams::new(3u32, 2u32, 4u32).unwrap())
    );
}
