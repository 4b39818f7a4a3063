use anyplace_core::arm::*;
use nalgebra::{Matrix6, Vector6};

fn solve(arm: &ArmModel, target: &anyplace_core::Pose, mut q: JointConfig, cap: f64, rw: f64, iters: usize) -> (f64, f64, JointConfig) {
    for _ in 0..iters {
        let cur = arm.fk(&q);
        let mut e = pose_error(&cur, target);
        for r in 3..6 { e[r] *= rw; }
        let n = e.norm();
        if n > cap { e *= cap / n; }
        let h = 1e-6;
        let mut jac = Matrix6::<f64>::zeros();
        for j in 0..6 {
            let mut qj = q; qj.0[j] += h;
            let fj = arm.fk(&qj);
            let dt = (fj.translation - cur.translation) / h;
            let dr = (fj.rotation * cur.rotation.inverse()).scaled_axis() / h * rw;
            for r in 0..3 { jac[(r, j)] = dt[r]; jac[(r + 3, j)] = dr[r]; }
        }
        let jjt = jac * jac.transpose() + Matrix6::identity() * 1e-4;
        let y: Vector6<f64> = match jjt.lu().solve(&e) { Some(y) => y, None => break };
        let mut dq = jac.transpose() * y;
        let dn = dq.norm();
        if dn > 0.5 { dq *= 0.5 / dn; }
        for j in 0..6 { q.0[j] += dq[j]; }
        arm.clamp_to_limits(&mut q);
    }
    let e = pose_error(&arm.fk(&q), target);
    (e.fixed_rows::<3>(0).norm(), e.fixed_rows::<3>(3).norm(), q)
}

fn main() {
    let arm = ArmModel::default_model();
    let target = arm.fk(&home_config());
    for (cap, rw) in [(0.3, 1.0), (0.15, 1.0), (0.3, 0.5), (0.15, 0.5), (1e9, 0.5), (0.1, 0.3)] {
        let (te, re, _q) = solve(&arm, &target, JointConfig::zeros(), cap, rw, 200);
        println!("cap {cap} rw {rw}: terr {te:.6} rerr {re:.6}");
    }
    // random reachable targets from zero seed, cap 0.15 rw 0.5
    use rand::SeedableRng; use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut ok = [0; 3];
    for _ in 0..40 {
        let mut q = [0.0; 6];
        for (i, j) in arm.joints.iter().enumerate() { q[i] = rng.gen_range(j.limits.0..=j.limits.1); }
        let t = arm.fk(&JointConfig(q));
        for (k, (cap, rw)) in [(0.15, 0.5), (0.3, 1.0), (1e9, 1.0)].iter().enumerate() {
            let (te, re, _) = solve(&arm, &t, JointConfig::zeros(), *cap, *rw, 200);
            if te < 1e-3 && re < 1e-2 { ok[k] += 1; }
        }
    }
    println!("zero-seed success /40: cap.15rw.5 {} cap.3rw1 {} nocap {}", ok[0], ok[1], ok[2]);
}
