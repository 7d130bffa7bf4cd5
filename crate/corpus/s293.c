void s293(int n, int *a) {
    for (int i = 0; i < n; i++) {
        a[i] = a[0];
    }
}
