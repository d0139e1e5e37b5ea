use fracprop::{parse_netlist, serialize_netlist};
use fracprop_core::circuit::{
    Circuit, ConstitutiveSpec, Element, ElementKind, Family, LossCoupling, MemristorLaw, Waveform,
};
use proptest::prelude::*;

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![0.01f64..100.0, 1e-9f64..1e-4, Just(1.0)]
}

fn real() -> impl Strategy<Value = f64> {
    prop_oneof![-10.0f64..10.0, Just(0.0), -1e-7f64..1e-7]
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        positive().prop_map(|slope| Family::Linear { slope }),
        prop::collection::vec(real(), 1..5).prop_map(|coeffs| Family::Polynomial { coeffs }),
        (positive(), positive()).prop_map(|(gain, scale)| Family::TanhSaturating { gain, scale }),
    ]
}

fn spec() -> impl Strategy<Value = ConstitutiveSpec> {
    (family(), prop::option::of((-50.0f64..-1.0, 1.0f64..50.0))).prop_map(|(f, r)| {
        ConstitutiveSpec::new(f, r.unwrap_or(ConstitutiveSpec::DEFAULT_RANGE)).unwrap()
    })
}

fn waveform() -> impl Strategy<Value = Waveform> {
    prop_oneof![
        real().prop_map(Waveform::Const),
        (real(), 0.0f64..2.0).prop_map(|(value, t0)| Waveform::Step { value, t0 }),
        (real(), positive(), real()).prop_map(|(amp, freq, phase)| Waveform::Sine { amp, freq, phase }),
        (real(), positive(), prop::collection::vec(real(), 2..6))
            .prop_map(|(t_start, dt, values)| Waveform::Samples { t_start, dt, values }),
    ]
}

fn kind() -> impl Strategy<Value = ElementKind> {
    prop_oneof![
        (positive(), any::<bool>()).prop_map(|(conductance, trainable)| ElementKind::Resistor { conductance, trainable }),
        spec().prop_map(ElementKind::Capacitor),
        spec().prop_map(ElementKind::Inductor),
        (spec(), any::<bool>(), prop_oneof![Just(0.5), 0.1f64..0.9]).prop_map(|(s, flux, order)| {
            let law = if flux { MemristorLaw::FluxControlled(s) } else { MemristorLaw::ChargeControlled(s) };
            ElementKind::FracMemristor { law, order }
        }),
        waveform().prop_map(ElementKind::VoltageSource),
        waveform().prop_map(ElementKind::CurrentSource),
        prop::option::of(waveform()).prop_map(|target| ElementKind::OutputCapacitor { target }),
    ]
}

fn circuit() -> impl Strategy<Value = Circuit> {
    let nodes = ["0", "a", "b", "n_1", "out"];
    (
        prop::collection::vec((kind(), 0..5usize, 1..5usize), 1..12),
        0.0f64..1.0,
        positive(),
    )
        .prop_filter_map("invalid circuit", move |(els, beta, c)| {
            let elements = els
                .into_iter()
                .enumerate()
                .map(|(i, (k, a, d))| Element::new(format!("{}{i}", k.tag()), nodes[a], nodes[(a + d) % 5], k))
                .collect();
            Circuit::new(elements, LossCoupling { beta, c }).ok()
        })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(c in circuit()) {
        let text = serialize_netlist(&c);
        let back = parse_netlist(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(serialize_netlist(&back), text);
    }

    #[test]
    fn parser_never_panics(text in "[ -~\n]{0,200}") {
        let _ = parse_netlist(&text);
    }

    #[test]
    fn errors_point_inside_the_input(lines in prop::collection::vec("[A-Z]{1,2} [a-z0-9]{1,3} [a-z0-9]{1,2} [a-z0-9]{1,2} [a-z]{1,3}=[a-z0-9().,:-]{0,8}", 1..6)) {
        let text = lines.join("\n");
        if let Err(e) = parse_netlist(&text) {
            prop_assert!(e.line >= 1 && e.line <= lines.len().max(1));
            prop_assert!(e.column >= 1);
        }
    }
}
