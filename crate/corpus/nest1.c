void nest1(int n, int *a, int *b) {
    for (int j = 0; j < n; j++) {
        for (int i = 0; i < n; i++) {
            a[i] = a[i] + b[j] % 2;
        }
    }
}
