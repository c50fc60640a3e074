fn main() {
    // CLI wired up once the scenario layer lands.
}
