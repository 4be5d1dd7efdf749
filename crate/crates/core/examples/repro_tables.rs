fn main() {
    print!("{}", sasn::repro::emit_repro_tables());
}
