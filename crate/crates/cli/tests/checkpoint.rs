use nsedit::checkpoint::{decode, decode_header, encode, Header, HEADER_LEN};
use nsedit::{load_checkpoint, save_checkpoint, CheckpointError};
use nsedit_core::{generate_stream, sequential_edit, EditorStrategy, Matrix, StreamSpec};

fn bits(m: &Matrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Checkpoint bytes assembled field by field from the documented layout.
fn fixture() -> Vec<u8> {
    let mut b = b"LGED".to_vec();
    b.extend_from_slice(&[1, 0]);
    for v in [2u64, 2, 7, 130] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend(le(&[1.5, -2.0, 0.25, 3.0]));
    b.extend(le(&[2.0, 0.5, 0.5, 1.0]));
    b.extend(le(&[0.0, 0.0, 0.0, 1.0]));
    b
}

#[test]
fn hand_written_fixture_parses() {
    let bytes = fixture();
    assert_eq!(bytes.len(), HEADER_LEN + 8 * 12);
    assert_eq!(decode_header(&bytes).unwrap(), Header { d1: 2, d0: 2, step: 7, count: 130 });
    let s = decode(&bytes).unwrap();
    assert_eq!(s.memory.weights, Matrix::from_rows(&[&[1.5, -2.0], &[0.25, 3.0]]));
    assert_eq!(s.accumulator.cov, Matrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]));
    assert_eq!(s.projection.mat, Matrix::diag(&[0.0, 1.0]));
    assert_eq!(s.projection.nullity, 1);
    assert_eq!(s.step, 7);
    assert_eq!(s.accumulator.count, 130);
    assert_eq!(encode(&s).unwrap(), bytes);
}

#[test]
fn trajectory_states_round_trip_bit_exactly() {
    let g = generate_stream(&StreamSpec::acceptance().with_seed(4)).unwrap();
    let w0 = g.initial_memory().unwrap();
    let traj = sequential_edit(&w0, &g.preservation, &g.batches, &EditorStrategy::dynamic(1e-8), true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for state in [&traj[0], &traj[3], &traj[8]] {
        let path = dir.path().join(format!("s{}.lged", state.step));
        save_checkpoint(state, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(bits(&back.memory.weights), bits(&state.memory.weights));
        assert_eq!(bits(&back.accumulator.cov), bits(&state.accumulator.cov));
        assert_eq!(bits(&back.projection.mat), bits(&state.projection.mat));
        assert_eq!(back.accumulator.count, state.accumulator.count);
        assert_eq!(back.step, state.step);
        assert_eq!(back.projection.nullity, state.projection.nullity);
    }
}

#[test]
fn truncation_reports_lengths() {
    let bytes = fixture();
    let err = decode(&bytes[..bytes.len() - 3]).unwrap_err();
    assert!(matches!(err, CheckpointError::Truncated { expected: 134, actual: 131 }), "{err}");
    assert!(err.to_string().contains("134") && err.to_string().contains("131"));
    let err = decode(&bytes[..10]).unwrap_err();
    assert!(matches!(err, CheckpointError::Truncated { expected: 38, actual: 10 }));
}

#[test]
fn foreign_files_are_rejected() {
    let mut bytes = fixture();
    bytes[0] = b'X';
    assert!(matches!(decode(&bytes), Err(CheckpointError::BadMagic { .. })));
    let mut bytes = fixture();
    bytes[4] = 2;
    assert!(matches!(decode(&bytes), Err(CheckpointError::UnsupportedVersion { found: 2 })));
    let mut bytes = fixture();
    bytes.push(0);
    assert!(matches!(decode(&bytes), Err(CheckpointError::TrailingBytes { extra: 1 })));
    let mut bytes = fixture();
    bytes[6..14].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(matches!(decode(&bytes), Err(CheckpointError::Overflow { .. })));
    let mut bytes = fixture();
    bytes[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(matches!(decode(&bytes), Err(CheckpointError::Core(_))));
}
