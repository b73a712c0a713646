use super::*;
use crate::lf::{generate_synthetic_lf, spiral_scan, LayerSpec, SyntheticParams};

fn sequence(width: usize, height: usize, grid: (usize, usize), disparity: f64, seed: u64) -> Vec<View> {
    let params = SyntheticParams {
        width,
        height,
        grid_s: grid.0,
        grid_t: grid.1,
        layers: vec![LayerSpec { seed, disparity }, LayerSpec { seed: seed + 1, disparity: disparity * 2.0 }],
        noise: 1.0,
        noise_seed: seed,
    };
    let (lf, _) = generate_synthetic_lf(&params).unwrap();
    let scan = spiral_scan(grid.0, grid.1).unwrap();
    scan.entries().iter().map(|e| lf.view(e.s, e.t).clone()).collect()
}

#[test]
fn quantizer_steps() {
    assert_eq!(quantizer_step(4), Ok(1.0));
    assert_eq!(quantizer_step(10), Ok(2.0));
    assert!((quantizer_step(28).unwrap() - 16.0).abs() < 1e-12);
    assert_eq!(quantizer_step(52), Err(CodecError::InvalidQp(52)));
    assert_eq!(quantizer_step(-1), Err(CodecError::InvalidQp(-1)));
}

#[test]
fn lossless_bypass_is_exact() {
    let frames = sequence(36, 20, (1, 17), 0.5, 3);
    let config = CodecConfig { lossless_bypass: true, ..CodecConfig::default() };
    let enc = encode_sequence(&frames, (1, 17), &config, &BTreeSet::new()).unwrap();
    for (poc, rec) in enc.reconstructions.iter().enumerate() {
        assert_eq!(rec.as_ref().unwrap(), &frames[poc], "poc {poc}");
    }
    let dec = decode_sequence(&enc.bitstream).unwrap();
    for (poc, view) in &dec.frames {
        assert_eq!(view, &frames[*poc]);
    }
}

#[test]
fn dropping_level_four() {
    let frames = sequence(24, 16, (1, 17), 1.0, 5);
    let odd: BTreeSet<usize> = (1..16).step_by(2).collect();
    let enc = encode_sequence(&frames, (1, 17), &CodecConfig::default(), &odd).unwrap();
    let flag_only: Vec<_> = enc.bitstream.units.iter().filter(|u| !u.coded).collect();
    assert_eq!(flag_only.len(), 8);
    assert!(flag_only.iter().all(|u| u.payload.is_empty() && u.temporal_id == 4 && u.bits() <= 16));
    assert_eq!(enc.bitstream.units.iter().filter(|u| u.coded).count(), 9);
    let dec = decode_sequence(&enc.bitstream).unwrap();
    assert_eq!(dec.dropped, odd);
    assert_eq!(dec.frames.len(), 9);
}

#[test]
fn broken_and_illegal_drops() {
    let frames = sequence(16, 16, (1, 17), 0.0, 1);
    let config = CodecConfig::default();
    let err = encode_sequence(&frames, (1, 17), &config, &BTreeSet::from([2])).unwrap_err();
    assert_eq!(err, CodecError::BrokenReference { poc: 1, reference: 2 });
    let err = encode_sequence(&frames, (1, 17), &config, &BTreeSet::from([4])).unwrap_err();
    assert_eq!(err, CodecError::IllegalDrop(4, 2));
    // level 3 may go once both level-4 neighbours are gone
    encode_sequence(&frames, (1, 17), &config, &BTreeSet::from([1, 2, 3])).unwrap();
}

#[test]
fn decoder_matches_encoder() {
    let frames = sequence(40, 24, (4, 5), 1.0, 9);
    let drops = BTreeSet::from([1, 2, 3, 9]);
    for qp in [18u8, 32] {
        let enc = encode_sequence(&frames, (4, 5), &CodecConfig::with_qp(qp), &drops).unwrap();
        let dec = decode_sequence(&enc.bitstream).unwrap();
        assert_eq!(dec.dropped, drops);
        for (poc, rec) in enc.reconstructions.iter().enumerate() {
            assert_eq!(rec.as_ref(), dec.frames.get(&poc));
        }
    }
}

#[test]
fn truncated_payload_is_corrupt() {
    let frames = sequence(16, 16, (1, 9), 1.0, 2);
    let mut enc = encode_sequence(&frames, (1, 9), &CodecConfig::default(), &BTreeSet::new()).unwrap();
    let last = enc.bitstream.units.last_mut().unwrap();
    let poc = last.poc as usize;
    last.payload.pop();
    assert_eq!(decode_sequence(&enc.bitstream), Err(CodecError::CorruptStream(poc)));
}

#[test]
fn version_mismatch() {
    let frames = sequence(16, 16, (1, 2), 0.0, 2);
    let mut enc = encode_sequence(&frames, (1, 2), &CodecConfig::default(), &BTreeSet::new()).unwrap();
    enc.bitstream.header.version = 9;
    assert_eq!(decode_sequence(&enc.bitstream), Err(CodecError::VersionError(9)));
}

#[test]
fn layer_extraction() {
    let frames = sequence(24, 16, (1, 17), 1.0, 4);
    let enc = encode_sequence(&frames, (1, 17), &CodecConfig::default(), &BTreeSet::new()).unwrap();
    let b = &enc.bitstream;
    assert_eq!(&extract_layers(b, 4), b);
    let base = extract_layers(b, 2);
    let pocs: BTreeSet<usize> = base.units.iter().map(|u| u.poc as usize).collect();
    assert_eq!(pocs, BTreeSet::from([0, 4, 8, 12, 16]));
    let full = decode_sequence(b).unwrap();
    let part = decode_sequence(&base).unwrap();
    for (poc, v) in &part.frames {
        assert_eq!(Some(v), full.frames.get(poc));
    }
    assert_eq!(part.frames.len(), 5);
}

#[test]
fn rate_accounting() {
    let frames = sequence(32, 32, (8, 8), 1.0, 6);
    let drops: BTreeSet<usize> = [1, 3, 5, 7].into_iter().collect();
    let enc = encode_sequence(&frames, (8, 8), &CodecConfig::with_qp(28), &drops).unwrap();
    let report = measure_rate(&enc.bitstream, 0..64);
    for &p in &drops {
        assert!(report.per_poc_bits[&p] <= 16);
    }
    let shares = report.level_shares();
    assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(report.total_bits, report.per_poc_bits.values().sum::<u64>());
    assert!(report.bpp > 0.0);
    assert_eq!(report, enc.rate);
}

#[test]
fn deterministic_bitstreams() {
    let frames = sequence(24, 24, (3, 3), 0.5, 8);
    let a = encode_sequence(&frames, (3, 3), &CodecConfig::default(), &BTreeSet::new()).unwrap();
    let b = encode_sequence(&frames, (3, 3), &CodecConfig::default(), &BTreeSet::new()).unwrap();
    assert_eq!(a.bitstream, b.bitstream);
}

#[test]
fn references_have_lower_temporal_id() {
    let frames = sequence(16, 16, (5, 7), 1.0, 12);
    let enc = encode_sequence(&frames, (5, 7), &CodecConfig::default(), &BTreeSet::new()).unwrap();
    let layout = enc.bitstream.header.layout().unwrap();
    let mut seen = BTreeMap::new();
    for (i, u) in enc.bitstream.units.iter().enumerate() {
        let (a, b) = layout.references(u.poc as usize);
        for r in [a, b].into_iter().flatten() {
            let (pos, tid): (usize, u8) = seen[&r];
            assert!(pos < i && tid < u.temporal_id);
        }
        seen.insert(u.poc as usize, (i, u.temporal_id));
    }
}

#[test]
fn odd_frame_sizes_round_trip() {
    let frames = sequence(19, 17, (2, 3), 1.0, 21);
    let enc = encode_sequence(&frames, (2, 3), &CodecConfig::with_qp(24), &BTreeSet::new()).unwrap();
    let dec = decode_sequence(&enc.bitstream).unwrap();
    assert_eq!(dec.frames[&5].width(), 19);
    assert_eq!(dec.frames[&5].height(), 17);
}
