use realm_sim::irealm::IrealmConfig;
use realm_sim::platform::{IrealmHw, ManagerDef, ManagerSpec, Mix, Platform, PlatformSpec, SubordinateDef, SubordinateSpec};
use realm_sim::protocol::{Channel, TraceRecord};

fn trace(w_interval: u64, len: u16) -> Vec<TraceRecord> {
    let spec = ManagerSpec {
        bytes_per_activation: 8 * u64::from(len),
        max_activations: Some(1),
        w_interval,
        ..ManagerSpec::dma_burst(len, Mix::Write, 0, 0x1000)
    };
    let ps = PlatformSpec {
        managers: vec![ManagerDef { name: "m".into(), spec, irealm: Some(IrealmHw::default()) }],
        subordinates: vec![SubordinateDef { name: "mem".into(), base: 0, limit: 0x10000, spec: SubordinateSpec::new(5), erealm: None }],
        max_outstanding_per_port: 8,
        irq_manager: None,
    };
    let mut p = Platform::build(&ps, true).expect("platform");
    p.program_irealm(0, 0, &IrealmConfig { bypass: false, ..IrealmConfig::default() }).expect("program");
    p.sim.run(200).expect("run");
    p.sim.trace().to_vec()
}

fn cycles(t: &[TraceRecord], from: &str, ch: Channel) -> Vec<u64> {
    t.iter().filter(|r| r.component == from && r.beat.channel == ch).map(|r| r.cycle).collect()
}

#[test]
fn slow_writer_is_buffered_then_streamed() {
    let t = trace(4, 4);
    let w_in = cycles(&t, "m", Channel::W);
    assert_eq!(w_in, [1, 5, 9, 13]);
    assert_eq!(cycles(&t, "irealm0", Channel::AW), [14]);
    assert_eq!(cycles(&t, "irealm0", Channel::W), [14, 15, 16, 17]);
}

#[test]
fn single_beat_forwarded_next_cycle() {
    let t = trace(1, 1);
    let w_in = cycles(&t, "m", Channel::W);
    assert_eq!(cycles(&t, "irealm0", Channel::AW), [w_in[0] + 1]);
}
